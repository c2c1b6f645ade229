"""Bregman divergences on nonnegative spectrograms and the phase retrieval objectives.

A divergence is generated by a strictly convex ``psi``::

    D(y | z) = sum_k psi(y_k) - psi(z_k) - psi'(z_k) (y_k - z_k)

Two problems are distinguished because ``D`` is not symmetric in general:

* ``right``: minimize ``D(R | |Ax|^d)``
* ``left``:  minimize ``D(|Ax|^d | R)``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidConfigurationError, InvalidInputError
from .stft import StftPlan, istft, stft

_ALIASES = {
    "quadratic": "quadratic", "qd": "quadratic", "euclidean": "quadratic",
    "kl": "kl", "kullback-leibler": "kl",
    "is": "is", "itakura-saito": "is",
    "beta": "beta",
}


@dataclass(frozen=True)
class DivergenceSpec:
    """One member of the Bregman family.

    ``DivergenceSpec("beta", 2.0)`` is normalized to the quadratic loss. The
    KL and IS divergences must be requested by name; ``beta`` equal to 1 or 0
    is rejected.
    """

    family: str
    beta: float | None = None

    def __post_init__(self):
        fam = _ALIASES.get(str(self.family).lower())
        if fam is None:
            raise InvalidConfigurationError(f"unknown divergence family {self.family!r}")
        beta = self.beta
        if fam == "beta":
            if beta is None or not np.isfinite(beta):
                raise InvalidConfigurationError("beta divergence needs a finite beta")
            beta = float(beta)
            if beta == 1.0 or beta == 0.0:
                name = "kl" if beta == 1.0 else "is"
                raise InvalidConfigurationError(
                    f"beta={beta:g} is a limit case; use DivergenceSpec({name!r}) instead"
                )
            if beta == 2.0:
                fam, beta = "quadratic", None
        elif beta is not None:
            raise InvalidConfigurationError(f"family {fam!r} takes no beta parameter")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "beta", beta)

    @property
    def beta_value(self) -> float:
        """Equivalent beta (2 quadratic, 1 KL, 0 IS)."""
        return {"quadratic": 2.0, "kl": 1.0, "is": 0.0}.get(self.family, self.beta)

    @property
    def label(self) -> str:
        return self.family if self.family != "beta" else f"beta{self.beta:g}"

    @property
    def needs_positive_model(self) -> bool:
        """Whether psi' or psi'' blows up at zero."""
        return self.family != "quadratic" and self.beta_value < 2.0


QUADRATIC = DivergenceSpec("quadratic")
KL = DivergenceSpec("kl")
IS = DivergenceSpec("is")


@dataclass(frozen=True)
class ProblemSpec:
    divergence: DivergenceSpec
    direction: str = "right"
    d: int = 1
    epsilon: float = 1e-8

    def __post_init__(self):
        direction = str(self.direction).lower()
        if direction not in ("left", "right"):
            raise InvalidConfigurationError(f"direction must be 'left' or 'right', got {self.direction!r}")
        if self.d not in (1, 2):
            raise InvalidConfigurationError(f"power d must be 1 or 2, got {self.d!r}")
        if not self.epsilon > 0:
            raise InvalidConfigurationError("epsilon must be positive")
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "d", int(self.d))


@dataclass(frozen=True, eq=False)
class Measurements:
    """Nonnegative spectrogram ``R ~ |stft(x)|^d`` (nonnegative-frequency rows)."""

    values: np.ndarray
    d: int = 1

    def __post_init__(self):
        R = np.asarray(self.values, dtype=float)
        if R.ndim != 2:
            raise InvalidInputError(f"measurements must be a 2-D array, got shape {R.shape}")
        if not np.all(np.isfinite(R)):
            raise InvalidInputError("measurements contain non-finite entries")
        if np.any(R < 0):
            raise InvalidInputError("measurements must be nonnegative")
        if self.d not in (1, 2):
            raise InvalidConfigurationError(f"power d must be 1 or 2, got {self.d!r}")
        object.__setattr__(self, "values", R)

    @property
    def shape(self):
        return self.values.shape


def generator_eval(spec: DivergenceSpec, z):
    """Return ``(psi(z), psi'(z), psi''(z))`` entrywise.

    Raises
    ------
    DomainError
        For negative ``z``, or ``z == 0`` when ``psi'`` or ``psi''`` diverges
        there (the caller forgot the epsilon floor).
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("generating functions are defined on z >= 0 only")
    fam = spec.family
    if fam == "quadratic":
        return 0.5 * z * z, z.copy(), np.ones_like(z)
    if np.any(z == 0):
        raise DomainError(f"{spec.label}: psi' or psi'' diverges at z = 0; apply the epsilon floor")
    if fam == "kl":
        return z * np.log(z), 1.0 + np.log(z), 1.0 / z
    if fam == "is":
        return -np.log(z), -1.0 / z, z ** -2.0
    b = spec.beta
    return (
        z ** b / (b * (b - 1.0)) - z / (b - 1.0) + 1.0 / b,
        (z ** (b - 1.0) - 1.0) / (b - 1.0),
        z ** (b - 2.0),
    )


def _dprime(spec, z):
    if spec.family == "quadratic":
        return z
    if spec.family == "kl":
        return 1.0 + np.log(z)
    if spec.family == "is":
        return -1.0 / z
    b = spec.beta
    return (z ** (b - 1.0) - 1.0) / (b - 1.0)


def _dsecond(spec, z):
    if spec.family == "quadratic":
        return np.ones_like(z)
    if spec.family == "kl":
        return 1.0 / z
    if spec.family == "is":
        return z ** -2.0
    return z ** (spec.beta - 2.0)


def divergence_terms(spec: DivergenceSpec, y, z) -> np.ndarray:
    """Entrywise ``d(y | z)``, written in cancellation-free closed forms."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if y.shape != z.shape:
        raise InvalidInputError(f"shape mismatch: {y.shape} vs {z.shape}")
    if np.any(y < 0) or np.any(z < 0):
        raise DomainError("divergence arguments must be nonnegative")
    fam = spec.family
    if fam == "quadratic":
        return 0.5 * (y - z) ** 2
    if np.any(z == 0):
        raise DomainError(f"{spec.label}: second argument must be positive")
    if fam == "kl":
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(y > 0, y * np.log(y / z), 0.0)
        return t - y + z
    if fam == "is":
        if np.any(y == 0):
            raise DomainError("IS divergence needs a positive first argument")
        q = y / z
        return q - np.log(q) - 1.0
    b = spec.beta
    if b < 0 and np.any(y == 0):
        raise DomainError(f"{spec.label}: first argument must be positive for beta < 0")
    return (y ** b + (b - 1.0) * z ** b - b * y * z ** (b - 1.0)) / (b * (b - 1.0))


def bregman_div(spec: DivergenceSpec, y, z, weights=None) -> float:
    """``D(y | z)``; optional ``weights`` multiply each entry before summing."""
    t = divergence_terms(spec, y, z)
    if weights is not None:
        t = t * weights
    return float(np.sum(t))


def floor_measurements(problem: ProblemSpec, R) -> tuple[np.ndarray, int]:
    """Floor ``R`` at ``epsilon**d`` for families whose log or reciprocal would see it.

    ``epsilon`` is a magnitude floor, so in the units of ``R`` it becomes
    ``epsilon**d``; this matches the floor on the model ``max(|X|, epsilon)**d``
    and keeps exact measurements a stationary point.

    Returns the floored array and the number of entries that were raised.
    """
    R = np.asarray(R.values if isinstance(R, Measurements) else R, dtype=float)
    if not problem.divergence.needs_positive_model:
        return R, 0
    floor = problem.epsilon ** problem.d
    low = R < floor
    return np.where(low, floor, R), int(np.count_nonzero(low))


def _weights(plan, X):
    if plan is None:
        return None
    return plan.bin_weights if X.shape[0] == plan.num_bins else None


def objective_value(problem: ProblemSpec, R, X, plan: StftPlan | None = None) -> float:
    """Objective evaluated on a TF matrix ``X``.

    With a ``plan`` and the stored half matrix, entries are weighted so the
    value is the sum over the full frequency range.
    """
    X = np.asarray(X)
    Rf, _ = floor_measurements(problem, R)
    if Rf.shape != X.shape:
        raise InvalidInputError(f"measurements {Rf.shape} and TF matrix {X.shape} differ in shape")
    P = np.maximum(np.abs(X), problem.epsilon) ** problem.d
    spec = problem.divergence
    if problem.direction == "right":
        t = divergence_terms(spec, Rf, P)
    else:
        t = divergence_terms(spec, P, Rf)
    w = _weights(plan, X)
    return float(np.sum(t if w is None else t * w))


def tf_gradient(problem: ProblemSpec, Rf: np.ndarray, X: np.ndarray) -> np.ndarray:
    """TF-domain factor ``G`` with ``grad J = istft(G)``; ``Rf`` already floored."""
    d = problem.d
    A = np.maximum(np.abs(X), problem.epsilon)
    P = A ** d
    spec = problem.divergence
    if problem.direction == "right":
        Z = _dsecond(spec, P) * (P - Rf)
    else:
        Z = _dprime(spec, P) - _dprime(spec, Rf)
    if d == 1:
        return X * (Z / A)
    return d * X * Z


def objective_grad(problem: ProblemSpec, R, x, plan: StftPlan) -> np.ndarray:
    """Gradient of the objective with respect to the real signal ``x``.

    This is the true real-variable gradient ``2 Re(Wirtinger gradient)``,
    i.e. ``istft(d * X |X|^(d-2) Z)``, so that a unit step on the quadratic
    d=1 problem is exactly a Griffin-Lim iteration.
    """
    Rf, _ = floor_measurements(problem, R)
    X = stft(plan, x)
    if Rf.shape != X.shape:
        raise InvalidInputError(f"measurements {Rf.shape} do not match plan {X.shape}")
    return istft(plan, tf_gradient(problem, Rf, X))
