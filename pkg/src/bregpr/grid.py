"""The grid of experimental setups (algorithm, loss, direction, power, step).

Setups are identified by codes ``algorithm.loss.direction-d`` such as
``G.KL.L1`` (gradient descent, KL, left, d=1) or ``A.IS.L1`` (ADMM). The
middle-dot spelling ``G·KL·L1`` and the ``GD`` prefix are accepted.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .divergence import DivergenceSpec, ProblemSpec
from .errors import InvalidConfigurationError

KINDS = ("gradient", "admm", "gla", "fgla", "gladmm", "init")
CONVENTIONS = ("librosa", "unitary")


@dataclass(frozen=True)
class Setup:
    code: str
    kind: str
    d: int | None = None
    family: str | None = None
    beta: float | None = None
    direction: str | None = None
    mu: float | None = None
    rho: float | None = None
    gamma: float = 0.99
    convention: str = "librosa"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigurationError(f"{self.code}: unknown algorithm kind {self.kind!r}")
        if self.kind == "gradient" and not (self.mu and self.mu > 0):
            raise InvalidConfigurationError(f"{self.code}: gradient setups need a step mu > 0")
        if self.kind == "admm" and not (self.rho and self.rho > 0):
            raise InvalidConfigurationError(f"{self.code}: ADMM setups need rho > 0")
        if self.kind != "init" and self.d not in (1, 2):
            raise InvalidConfigurationError(f"{self.code}: power d must be 1 or 2")
        if not 0 <= self.gamma < 1:
            raise InvalidConfigurationError(f"{self.code}: gamma must lie in [0, 1)")
        if self.convention not in CONVENTIONS:
            raise InvalidConfigurationError(
                f"{self.code}: step convention must be one of {CONVENTIONS}, got {self.convention!r}")

    @property
    def divergence(self) -> DivergenceSpec | None:
        if self.family is None:
            return None
        return DivergenceSpec(self.family, self.beta if self.family == "beta" else None)

    def problem(self, epsilon: float = 1e-8) -> ProblemSpec | None:
        """Objective optimized by this setup (``None`` for GLA-type baselines)."""
        if self.kind not in ("gradient", "admm"):
            return None
        return ProblemSpec(self.divergence, self.direction, self.d, epsilon)

    def effective_mu(self, fft_size: int) -> float:
        """Step size for the unitary STFT used by the solvers.

        Under the ``librosa`` convention ``mu`` was tuned for an unnormalized
        FFT whose gradient is synthesized with the inverse STFT. Both scale
        the gradient by ``M**((d*beta - 2)/2)`` relative to the unitary
        transform, where ``M`` is the FFT size; the quadratic d=1 step is unchanged.
        """
        if self.mu is None:
            return None
        if self.convention == "unitary":
            return self.mu
        return self.mu * float(fft_size) ** ((self.d * self.divergence.beta_value - 2.0) / 2.0)

    def effective_rho(self, fft_size: int) -> float:
        """ADMM penalty for the unitary STFT: ``rho * M**((2 - beta)/2)`` under ``librosa``."""
        if self.rho is None:
            return None
        if self.convention == "unitary":
            return self.rho
        return self.rho * float(fft_size) ** ((2.0 - self.divergence.beta_value) / 2.0)

    def with_overrides(self, **kw) -> "Setup":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw) if kw else self


def canonical_code(code: str) -> str:
    c = code.strip().upper().replace("·", ".").replace("⋅", ".")
    if c.startswith("GD."):
        c = "G." + c[3:]
    return c


@lru_cache(maxsize=None)
def _load_default() -> dict:
    text = resources.files("bregpr").joinpath("data/setups.json").read_text()
    return json.loads(text)


def load_grid(path: str | Path | None = None) -> dict[str, Setup]:
    """Load the setup grid, keyed by canonical code, in file order."""
    if path is None:
        raw = _load_default()
    else:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfigurationError(f"cannot read grid file {path}: {exc}") from exc
    defaults = raw.get("defaults", {})
    grid = {}
    for entry in raw["setups"]:
        entry = dict(entry)
        code = canonical_code(entry.pop("code"))
        entry.setdefault("gamma", defaults.get("gamma", 0.99))
        entry.setdefault("convention", defaults.get("convention", "librosa"))
        try:
            grid[code] = Setup(code=code, **entry)
        except TypeError as exc:
            raise InvalidConfigurationError(f"{code}: {exc}") from exc
    return grid


def resolve(code: str, grid: dict[str, Setup] | None = None, **overrides) -> Setup:
    """Look a code up in the grid and apply non-``None`` overrides (mu, rho, gamma, d, convention)."""
    grid = load_grid() if grid is None else grid
    key = canonical_code(code)
    if key not in grid:
        raise InvalidConfigurationError(
            f"unknown algorithm code {code!r}; known codes: {', '.join(grid)}"
        )
    return grid[key].with_overrides(**overrides)


def default_iterations() -> int:
    return int(_load_default().get("defaults", {}).get("iterations", 2500))
