"""Deterministic synthetic test signals standing in for speech/music excerpts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import chirp, lfilter

from .errors import InvalidConfigurationError
from .stft import TimeSignal

KINDS = ("multisine", "chirp", "noise-burst")


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "multisine"
    duration_s: float = 0.5
    seed: int = 0

    @property
    def input_id(self) -> str:
        return f"{self.kind}-{self.duration_s:g}s-s{self.seed}"


def _fade(n, sr, ms=10.0):
    k = min(n // 4, int(sr * ms / 1000))
    env = np.ones(n)
    if k > 0:
        ramp = np.sin(0.5 * np.pi * (np.arange(k) + 0.5) / k) ** 2
        env[:k] = ramp
        env[n - k:] = ramp[::-1]
    return env


def synth_signal(spec: SynthSpec, sample_rate: int = 22050, min_length: int = 2048) -> TimeSignal:
    """Generate a unit-peak signal of ``spec.kind``.

    ``multisine``: a few random partials with slow amplitude modulation.
    ``chirp``: a three-harmonic linear sweep.
    ``noise-burst``: low-passed noise with loud bursts over a quieter floor.

    Raises
    ------
    InvalidConfigurationError
        Unknown kind or fewer than ``min_length`` samples (two default frames).
    """
    if spec.kind not in KINDS:
        raise InvalidConfigurationError(f"unknown synthetic kind {spec.kind!r}; choose from {KINDS}")
    n = int(round(spec.duration_s * sample_rate))
    if n < min_length:
        raise InvalidConfigurationError(
            f"duration {spec.duration_s}s gives {n} samples, fewer than {min_length}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(KINDS.index(spec.kind),)))
    t = np.arange(n) / sample_rate
    if spec.kind == "multisine":
        k = int(rng.integers(4, 9))
        freqs = rng.uniform(110.0, 3500.0, k)
        amps = rng.uniform(0.2, 1.0, k)
        phases = rng.uniform(0, 2 * np.pi, k)
        rates = rng.uniform(0.5, 4.0, k)
        x = np.zeros(n)
        for f, a, p, m in zip(freqs, amps, phases, rates):
            x += a * (0.6 + 0.4 * np.sin(2 * np.pi * m * t + p)) * np.sin(2 * np.pi * f * t + p)
    elif spec.kind == "chirp":
        f0 = rng.uniform(150.0, 400.0)
        f1 = rng.uniform(1500.0, 3000.0)
        x = sum(chirp(t, h * f0, t[-1], h * f1, phi=rng.uniform(0, 360)) / h for h in (1, 2, 3))
    else:
        noise = lfilter([1.0], [1.0, -rng.uniform(0.5, 0.9)], rng.standard_normal(n))
        env = np.full(n, 0.15)
        pos = 0
        while pos < n:
            pos += int(rng.uniform(0.03, 0.12) * sample_rate)
            length = int(rng.uniform(0.04, 0.15) * sample_rate)
            env[pos: pos + length] = rng.uniform(0.6, 1.0)
            pos += length
        x = noise * env
    x = x * _fade(n, sample_rate)
    return TimeSignal(x / np.max(np.abs(x)), sample_rate)
