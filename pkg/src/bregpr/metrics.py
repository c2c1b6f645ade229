"""Spectral convergence and delay/scale-invariant SNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .divergence import Measurements
from .errors import InvalidInputError, UndefinedMetricError
from .stft import StftPlan, stft, tf_norm

SNR_CAP_DB = 140.0


@dataclass(frozen=True)
class Alignment:
    shift: int
    scale: float
    correlation: float


def spectral_convergence(R, x, plan: StftPlan, d: int | None = None) -> float:
    """``|| R^(1/d) - |stft(x)| || / || R ||`` over the full frequency range.

    The denominator is ``||R||`` for both powers, so for ``d = 2`` the value
    mixes magnitude and power units.
    """
    if d is None:
        d = R.d if isinstance(R, Measurements) else 1
    Rv = R.values if isinstance(R, Measurements) else np.asarray(R, dtype=float)
    X = stft(plan, x)
    if Rv.shape != X.shape:
        raise InvalidInputError(f"measurements {Rv.shape} do not match plan {X.shape}")
    den = tf_norm(plan, Rv)
    if den == 0:
        raise UndefinedMetricError("spectral convergence is undefined for an all-zero spectrogram")
    target = Rv if d == 1 else np.sqrt(Rv)
    return tf_norm(plan, target - np.abs(X)) / den


def shift_signal(x, k: int) -> np.ndarray:
    """``out[n] = x[n - k]``, zero-filled (non-circular)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    n = x.size
    if k >= 0:
        if k < n:
            out[k:] = x[: n - k]
    elif -k < n:
        out[: n + k] = x[-k:]
    return out


def align(x_star, x) -> Alignment:
    """Best integer delay and real scale mapping ``x`` onto ``x_star``.

    The delay maximizes ``|<x_star, shift(x, k)>| / ||shift(x, k)||`` over all
    lags, found with an FFT cross-correlation; the winning candidates are
    re-scored exactly.
    """
    x_star = np.asarray(x_star, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.size
    # corr[k + n - 1] = <x_star, shift(x, k)>
    corr = fftconvolve(x_star, x[::-1], mode="full")
    e = np.concatenate([[0.0], np.cumsum(x * x)])
    lags = np.arange(-(n - 1), n)
    # energy of shift(x, k): samples x[max(0,-k) : n - max(0,k)]
    energy = e[np.minimum(n, n - lags)] - e[np.maximum(0, -lags)]
    total = e[-1]
    valid = energy > 1e-16 * total
    score = np.where(valid, np.abs(corr) / np.sqrt(np.where(valid, energy, 1.0)), -np.inf)
    cand = np.argsort(score)[::-1][:8]
    best = None
    for i in sorted(cand, key=lambda i: (abs(lags[i]), lags[i])):
        s = shift_signal(x, int(lags[i]))
        ss = float(s @ s)
        if ss == 0:
            continue
        c = float(x_star @ s)
        val = abs(c) / np.sqrt(ss)
        if best is None or val > best[0] * (1 + 1e-12):
            best = (val, int(lags[i]), c / ss, c)
    return Alignment(shift=best[1], scale=best[2], correlation=best[3])


def align_and_snr(x_star, x) -> tuple[float, Alignment | None]:
    """SNR in dB of ``x`` against ``x_star`` after optimal delay and scale.

    Capped at :data:`SNR_CAP_DB`; an all-zero ``x`` yields ``-inf`` and no
    alignment.
    """
    x_star = np.asarray(x_star, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_star.shape != x.shape or x_star.ndim != 1:
        raise InvalidInputError("reference and estimate must be 1-D with equal lengths")
    ref = np.linalg.norm(x_star)
    if ref == 0:
        raise UndefinedMetricError("SNR is undefined for an all-zero reference")
    if not np.any(x):
        return float("-inf"), None
    al = align(x_star, x)
    err = np.linalg.norm(x_star - al.scale * shift_signal(x, al.shift))
    if err == 0:
        return SNR_CAP_DB, al
    return min(SNR_CAP_DB, 20.0 * np.log10(ref / err)), al


def snr(x_star, x) -> float:
    return align_and_snr(x_star, x)[0]


def snr_improvement(x_star, x_init, x_final) -> float:
    """Gain in aligned SNR from the initial to the final estimate (dB)."""
    return snr(x_star, x_final) - snr(x_star, x_init)
