"""Phase retrieval solvers: accelerated Bregman gradient descent, Bregman ADMM,
and the Griffin-Lim baselines (GLA, fast GLA, GLADMM).

Every solver takes measurements on the nonnegative-frequency rows of a plan,
an initial (padded) signal, and returns a :class:`RunReport`. Signals are
kept on the plan's support (:meth:`bregpr.stft.StftPlan.restrict`), where the
STFT is an isometry, so synthesis followed by restriction is the exact
projection onto consistent spectrograms. Time-frequency
iterates stay frequency-Hermitian by construction; :func:`bregpr.stft.istft`
checks that at every synthesis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .divergence import Measurements, ProblemSpec, floor_measurements, objective_value, tf_gradient
from .errors import (DivergedRunError, InvalidConfigurationError, InvalidInputError,
                     UnsupportedOperationError)
from .grid import Setup
from .prox import ProxSpec, prox_div
from .stft import StftPlan, imag_residual, istft, stft, tf_norm

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class SolverConfig:
    """Run-level settings. Algorithm hyperparameters live in :class:`bregpr.grid.Setup`.

    ``momentum_start`` selects the value of the previous gradient iterate
    before the first step: ``"init"`` (the initial signal, which makes the
    first extrapolation vanish) or ``"zero"``.
    """

    iterations: int = 2500
    seed: int = 0
    trace_period: int = 1
    record_iterates: bool = False
    momentum_start: str = "init"
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidConfigurationError("iterations must be >= 0")
        if self.trace_period < 1:
            raise InvalidConfigurationError("trace_period must be >= 1")
        if self.momentum_start not in ("init", "zero"):
            raise InvalidConfigurationError("momentum_start must be 'init' or 'zero'")


@dataclass
class RunReport:
    algorithm: str
    final_x: np.ndarray
    loss_trace: list[tuple[int, float]]
    wall_time: float = 0.0
    iterations: int = 0
    floored_entry_count: int = 0
    max_imag_residual: float = 0.0
    config: dict = field(default_factory=dict)
    iterates: list[np.ndarray] | None = None

    @property
    def initial_objective(self) -> float:
        return self.loss_trace[0][1]

    @property
    def final_objective(self) -> float:
        return self.loss_trace[-1][1]


def _values(R) -> np.ndarray:
    return R.values if isinstance(R, Measurements) else np.asarray(R, dtype=float)


def _check_shapes(R, plan: StftPlan, x0):
    if R.shape != plan.shape:
        raise InvalidInputError(f"measurements of shape {R.shape} do not match plan {plan.shape}")
    if np.asarray(x0).shape != (plan.padded_length,):
        raise InvalidInputError(f"initial signal must have the padded length {plan.padded_length}")


def unit_phase(X, epsilon: float = 1e-8) -> np.ndarray:
    """``X / |X|`` with the magnitude floored at ``epsilon`` and phase 0 at exact zeros."""
    a = np.abs(X)
    return np.where(a > 0, X / np.maximum(a, epsilon), 1.0)


def random_phase_init(R, plan: StftPlan, seed=0, d: int | None = None):
    """Random-phase starting point ``X = R^(1/d) exp(i phi)`` and ``x = istft(X)``.

    Phases are i.i.d. uniform on ``[0, 2 pi)``; on the self-mirrored DC and
    Nyquist rows the phase is rounded to 0 or pi so that ``X`` stays
    frequency-Hermitian.

    Parameters
    ----------
    seed : int, numpy.random.SeedSequence or numpy.random.Generator
    d : int, optional
        Power of the measurements; taken from ``R`` when it is a
        :class:`~bregpr.divergence.Measurements`.
    """
    if d is None:
        d = R.d if isinstance(R, Measurements) else 1
    Rv = _values(R)
    if Rv.shape != plan.shape:
        raise InvalidInputError(f"measurements of shape {Rv.shape} do not match plan {plan.shape}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=plan.shape)
    mirrored = [0] + ([plan.num_bins - 1] if plan.fft_size % 2 == 0 else [])
    phi[mirrored] = np.where(np.cos(phi[mirrored]) >= 0, 0.0, np.pi)
    mag = Rv if d == 1 else np.sqrt(Rv)
    phase = np.exp(1j * phi)
    phase[mirrored] = phase[mirrored].real
    X = mag * phase
    return X, plan.restrict(istft(plan, X))


class _Tracker:
    """Loss trace, iterate log and divergence detection shared by all solvers."""

    def __init__(self, name, config: SolverConfig, extra_config):
        self.name = name
        self.config = config
        self.trace = []
        self.iterates = [] if config.record_iterates else None
        self.max_res = 0.0
        self.start = time.perf_counter()
        self.echo = {"algorithm": name, "iterations": config.iterations, "seed": config.seed,
                     "momentum_start": config.momentum_start, **extra_config}
        self.floored = 0
        self.iterations = 0
        self.x = None

    def synthesize(self, plan, V, t):
        """Record the imaginary residual of ``V`` and return its restricted synthesis."""
        if not np.all(np.isfinite(V)):
            raise DivergedRunError(f"{self.name}: non-finite TF iterate at iteration {t}", self.report())
        r = imag_residual(plan, V)
        if r > self.max_res:
            self.max_res = r
        return plan.restrict(istft(plan, V))

    def report(self) -> RunReport:
        return RunReport(
            algorithm=self.name, final_x=self.x, loss_trace=list(self.trace),
            wall_time=time.perf_counter() - self.start, iterations=self.iterations,
            floored_entry_count=self.floored, max_imag_residual=self.max_res,
            config=dict(self.echo), iterates=self.iterates,
        )

    def step(self, t, x, loss_fn):
        """Record iteration ``t``; ``loss_fn`` is called lazily at trace points."""
        if not np.all(np.isfinite(x)):
            raise DivergedRunError(f"{self.name}: non-finite iterate at iteration {t}", self.report())
        self.x = x
        self.iterations = t
        if self.iterates is not None:
            self.iterates.append(x.copy())
        last = t == self.config.iterations
        if t == 0 or t % self.config.trace_period == 0 or last:
            J = float(loss_fn())
            if not np.isfinite(J):
                raise DivergedRunError(f"{self.name}: non-finite objective at iteration {t}", self.report())
            if t > 0 and self.trace and self.trace[0][1] > 0 and J > DIVERGENCE_FACTOR * self.trace[0][1]:
                self.trace.append((t, J))
                raise DivergedRunError(
                    f"{self.name}: objective grew by more than {DIVERGENCE_FACTOR:g}x", self.report())
            self.trace.append((t, J))


def quadratic_loss(R, X, plan: StftPlan) -> float:
    """``|| R - |X| ||^2`` over the full matrix (Griffin-Lim objective, d = 1)."""
    return float(np.sum(plan.bin_weights * (R - np.abs(X)) ** 2))


def run_gradient(problem: ProblemSpec, R, plan: StftPlan, config: SolverConfig, init,
                 mu: float = 1.0, gamma: float = 0.99, name: str = "gradient") -> RunReport:
    """Accelerated gradient descent on the Bregman objective.

    ``y_{t+1} = x_t - mu grad J(x_t)``, ``x_{t+1} = y_{t+1} + gamma (y_{t+1} - y_t)``.

    Raises
    ------
    DivergedRunError
        On a non-finite iterate or an objective above 1e6 times its initial value.
    """
    if not mu > 0:
        raise InvalidConfigurationError("step size mu must be positive")
    if not 0 <= gamma < 1:
        raise InvalidConfigurationError("gamma must lie in [0, 1)")
    Rv = _values(R)
    x = np.array(init, dtype=float)
    _check_shapes(Rv, plan, x)
    x = plan.restrict(x)
    Rf, floored = floor_measurements(problem, Rv)
    tr = _Tracker(name, config, {"mu": mu, "gamma": gamma, "d": problem.d,
                                 "family": problem.divergence.label, "direction": problem.direction})
    tr.floored = floored
    X = stft(plan, x)
    tr.step(0, x, lambda: objective_value(problem, Rv, X, plan))
    y_old = x.copy() if config.momentum_start == "init" else np.zeros_like(x)
    for t in range(1, config.iterations + 1):
        G = tf_gradient(problem, Rf, X)
        g = tr.synthesize(plan, G, t)
        y = x - mu * g
        x = y + gamma * (y - y_old)
        y_old = y
        X = stft(plan, x)
        tr.step(t, x, lambda: objective_value(problem, Rv, X, plan))
    return tr.report()


def run_admm(problem: ProblemSpec, R, plan: StftPlan, config: SolverConfig, init,
             rho: float = 0.1, name: str = "admm") -> RunReport:
    """ADMM on the split ``stft(x) = u * exp(i theta)`` with a Bregman data term (d = 1)."""
    if problem.d != 1:
        raise UnsupportedOperationError("ADMM is provided for magnitude measurements (d = 1) only")
    pspec = ProxSpec(problem.divergence, problem.direction, rho)
    Rv = _values(R)
    x = np.array(init, dtype=float)
    _check_shapes(Rv, plan, x)
    x = plan.restrict(x)
    tr = _Tracker(name, config, {"rho": rho, "d": 1, "family": problem.divergence.label,
                                 "direction": problem.direction})
    tr.floored = floor_measurements(problem, Rv)[1]
    X = stft(plan, x)
    lam = np.zeros_like(X)
    tr.step(0, x, lambda: objective_value(problem, Rv, X, plan))
    for t in range(1, config.iterations + 1):
        H = X + lam / rho
        absH = np.abs(H)
        phase = np.where(absH > 0, H / np.where(absH > 0, absH, 1.0), 1.0)
        U = prox_div(pspec, Rv, absH, problem.epsilon)
        Z = U * phase
        V = Z - lam / rho
        x = tr.synthesize(plan, V, t)
        X = stft(plan, x)
        lam = lam + rho * (X - Z)
        tr.step(t, x, lambda: objective_value(problem, Rv, X, plan))
    return tr.report()


def _check_d1(R):
    if isinstance(R, Measurements) and R.d != 1:
        raise UnsupportedOperationError("Griffin-Lim baselines need magnitude (d = 1) measurements")


def run_gla(R, plan: StftPlan, config: SolverConfig, init, name: str = "GLA") -> RunReport:
    """Griffin-Lim: ``x <- istft(R * X / |X|)`` with ``X = stft(x)``."""
    _check_d1(R)
    Rv = _values(R)
    x = np.array(init, dtype=float)
    _check_shapes(Rv, plan, x)
    x = plan.restrict(x)
    tr = _Tracker(name, config, {"d": 1})
    X = stft(plan, x)
    tr.step(0, x, lambda: quadratic_loss(Rv, X, plan))
    for t in range(1, config.iterations + 1):
        V = Rv * unit_phase(X, config.epsilon)
        x = tr.synthesize(plan, V, t)
        X = stft(plan, x)
        tr.step(t, x, lambda: quadratic_loss(Rv, X, plan))
    return tr.report()


def run_fgla(R, plan: StftPlan, config: SolverConfig, init, gamma: float = 0.99,
             name: str = "FGLA") -> RunReport:
    """Fast Griffin-Lim with constant momentum ``gamma`` on the consistent iterates.

    ``T_{t+1} = P_C(P_M(X_t))``, ``X_{t+1} = T_{t+1} + gamma (T_{t+1} - T_t)``,
    started from ``T_0 = X_0 = stft(init)``. The momentum is applied to the
    synthesized signals, which is equivalent by linearity of the STFT.
    """
    if not 0 <= gamma < 1:
        raise InvalidConfigurationError("gamma must lie in [0, 1)")
    _check_d1(R)
    Rv = _values(R)
    x = np.array(init, dtype=float)
    _check_shapes(Rv, plan, x)
    x = plan.restrict(x)
    tr = _Tracker(name, config, {"d": 1, "gamma": gamma})
    Xm = stft(plan, x)
    tr.step(0, x, lambda: quadratic_loss(Rv, Xm, plan))
    t_prev = x
    for t in range(1, config.iterations + 1):
        V = Rv * unit_phase(Xm, config.epsilon)
        t_new = tr.synthesize(plan, V, t)
        Xm = stft(plan, t_new + gamma * (t_new - t_prev))
        t_prev = t_new
        tr.step(t, t_new, lambda: quadratic_loss(Rv, stft(plan, t_new), plan))
    return tr.report()


def run_gladmm(R, plan: StftPlan, config: SolverConfig, init, force_zero_dual: bool = False,
               name: str = "GLADMM") -> RunReport:
    """ADMM on the feasibility problem "consistent and of magnitude R".

    ``X~ = P_M(Y~ - W~)``, ``Y~ = P_C(X~ + W~)``, ``W~ += X~ - Y~``. The reported
    signal is the synthesis of the consistent iterate ``Y~``. With
    ``force_zero_dual`` the dual stays at zero and the iteration is GLA.
    """
    _check_d1(R)
    Rv = _values(R)
    x = np.array(init, dtype=float)
    _check_shapes(Rv, plan, x)
    x = plan.restrict(x)
    tr = _Tracker(name, config, {"d": 1, "force_zero_dual": force_zero_dual})
    Y = stft(plan, x)
    W = np.zeros_like(Y)
    tr.step(0, x, lambda: quadratic_loss(Rv, Y, plan))
    for t in range(1, config.iterations + 1):
        Xt = Rv * unit_phase(Y - W, config.epsilon)
        V = Xt + W
        x = tr.synthesize(plan, V, t)
        Y = stft(plan, x)
        if not force_zero_dual:
            W = W + Xt - Y
        tr.step(t, x, lambda: quadratic_loss(Rv, Y, plan))
    return tr.report()


def run_setup(setup: Setup, R, plan: StftPlan, init, config: SolverConfig | None = None) -> RunReport:
    """Dispatch a grid :class:`~bregpr.grid.Setup` to its solver."""
    config = SolverConfig() if config is None else config
    d = R.d if isinstance(R, Measurements) else setup.d
    if setup.kind != "init" and setup.d != d:
        raise InvalidConfigurationError(
            f"{setup.code} expects d={setup.d} measurements, got d={d}")
    if setup.kind == "gradient":
        return run_gradient(setup.problem(config.epsilon), R, plan, config, init,
                            mu=setup.effective_mu(plan.fft_size), gamma=setup.gamma, name=setup.code)
    if setup.kind == "admm":
        return run_admm(setup.problem(config.epsilon), R, plan, config, init,
                        rho=setup.effective_rho(plan.fft_size), name=setup.code)
    if setup.kind == "gla":
        return run_gla(R, plan, config, init, name=setup.code)
    if setup.kind == "fgla":
        return run_fgla(R, plan, config, init, gamma=setup.gamma, name=setup.code)
    if setup.kind == "gladmm":
        return run_gladmm(R, plan, config, init, name=setup.code)
    raise InvalidConfigurationError(f"{setup.code} is not an iterative algorithm")
