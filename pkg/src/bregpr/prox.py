"""Closed-form proximal operators of Bregman divergences, plus Lambert W.

``prox_div`` returns, entrywise, the minimizer over ``u >= 0`` of::

    D(r | u) + rho/2 (u - y)^2     (right)
    D(u | r) + rho/2 (u - y)^2     (left)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergence import DivergenceSpec
from .errors import DomainError, InvalidConfigurationError, InvalidInputError, UnsupportedOperationError

_SUPPORTED = {
    ("quadratic", "right"), ("quadratic", "left"),
    ("kl", "right"), ("kl", "left"),
    ("is", "left"),
}

_MAX_HALLEY = 50
_EXP_SWITCH = 500.0


def lambert_w0(z):
    """Principal branch ``W0`` of the inverse of ``w -> w e^w`` for ``z >= 0``.

    Halley iteration started from ``log(1 + z)`` below ``e`` and from
    ``log z - log log z`` above.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(z_arr)) or np.any(z_arr < 0):
        raise DomainError("lambert_w0 is only provided for z >= 0")
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    big = z_arr >= np.e
    w = np.log1p(z_arr)
    lz = np.log(z_arr[big])
    w[big] = lz - np.log(lz)
    tol = 1e-12 * (1.0 + z_arr)
    active = np.ones(z_arr.shape, dtype=bool)
    for _ in range(_MAX_HALLEY):
        ew = np.exp(w[active])
        wa = w[active]
        f = wa * ew - z_arr[active]
        wp1 = wa + 1.0
        step = f / (ew * wp1 - (wa + 2.0) * f / (2.0 * wp1))
        w[active] = wa - step
        done = (np.abs(f) <= 0.25 * tol[active]) | (np.abs(step) <= 4e-16 * np.maximum(np.abs(wa), 1e-300))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    w[z_arr == 0] = 0.0
    return float(w[0]) if scalar else w


def _lambert_w0_exp(t):
    """``W0(exp(t))`` without forming ``exp(t)``; Newton on ``w + log w = t``."""
    t = np.asarray(t, dtype=float)
    w = t - np.log(t)
    for _ in range(_MAX_HALLEY):
        step = (w + np.log(w) - t) / (1.0 + 1.0 / w)
        w = w - step
        if np.all(np.abs(step) <= 4e-16 * w):
            break
    return w


@dataclass(frozen=True)
class ProxSpec:
    divergence: DivergenceSpec
    direction: str
    rho: float

    def __post_init__(self):
        direction = str(self.direction).lower()
        if not self.rho > 0 or not np.isfinite(self.rho):
            raise InvalidConfigurationError(f"rho must be positive and finite, got {self.rho!r}")
        if (self.divergence.family, direction) not in _SUPPORTED:
            raise UnsupportedOperationError(
                f"no closed-form prox for {self.divergence.label}-{direction}"
            )
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "rho", float(self.rho))


def _pos_root(a, b, c):
    """Nonnegative root of ``a u^2 + b u + c`` with ``a > 0``, ``c <= 0``, cancellation-free."""
    s = np.sqrt(b * b - 4.0 * a * c)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(b > 0, -2.0 * c / (b + s), (s - b) / (2.0 * a))
    return np.where((c == 0) & (b >= 0), 0.0, out)


def prox_div(spec: ProxSpec, r, y, epsilon: float = 1e-8) -> np.ndarray:
    """Entrywise proximal step; the output is always nonnegative.

    Parameters
    ----------
    spec : ProxSpec
    r : array_like
        Nonnegative measurements.
    y : array_like
        Point at which the prox is evaluated.
    epsilon : float
        Floor applied to ``r`` for the IS form, which uses ``1/r``.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    if r.shape != y.shape:
        r, y = np.broadcast_arrays(r, y)
    if np.any(r < 0):
        raise InvalidInputError("measurements must be nonnegative")
    rho = spec.rho
    fam = spec.divergence.family
    if fam == "quadratic":
        return np.maximum((rho * y + r) / (rho + 1.0), 0.0)
    if fam == "kl" and spec.direction == "right":
        # stationarity: rho u^2 + (1 - rho y) u - r = 0
        return _pos_root(rho, 1.0 - rho * y, -r)
    if fam == "kl":
        # stationarity: log u - log r + rho (u - y) = 0  =>  rho u = W(rho r e^{rho y})
        out = np.zeros(np.broadcast(r, y).shape)
        pos = r > 0
        with np.errstate(divide="ignore"):
            t = np.log(rho * r[pos]) + rho * y[pos]
        w = np.empty_like(t)
        small = t < _EXP_SWITCH
        w[small] = lambert_w0(np.exp(t[small]))
        w[~small] = _lambert_w0_exp(t[~small])
        out[pos] = w / rho
        return out
    # IS left: rho u^2 + (1/r - rho y) u - 1 = 0
    rf = np.maximum(r, epsilon)
    return _pos_root(rho, 1.0 / rf - rho * y, -np.ones_like(rf))
