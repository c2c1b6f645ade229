"""Minimal WAV reader/writer (PCM16 or float32, mono or downmixed)."""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import MalformedWavError, SampleRateMismatchError, UnsupportedCodecError, WavError
from .stft import TimeSignal


def load_wav(path, expected_rate: int | None = None) -> TimeSignal:
    """Read a WAV file into a float signal in ``[-1, 1]``.

    No resampling is done: a rate different from ``expected_rate`` raises
    :class:`~bregpr.errors.SampleRateMismatchError`.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise WavError(f"{path}: no such file") from exc
    except (ValueError, EOFError, UnboundLocalError, struct.error) as exc:
        # scipy hits UnboundLocalError on a RIFF file without a fmt chunk
        msg = str(exc)
        if "Unknown wave file format" in msg or "Unsupported bit depth" in msg:
            raise UnsupportedCodecError(f"{path}: {msg}") from exc
        raise MalformedWavError(f"{path}: {msg}") from exc
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise UnsupportedCodecError(f"{path}: sample format {data.dtype} is not PCM16 or float32")
    if x.ndim == 2:
        x = x.mean(axis=1)
    if expected_rate is not None and rate != expected_rate:
        raise SampleRateMismatchError(
            f"{path}: sample rate {rate} Hz differs from the configured {expected_rate} Hz; "
            "resample the file first")
    if x.size == 0:
        raise MalformedWavError(f"{path}: no samples")
    return TimeSignal(x, rate)


def write_wav(path, signal: TimeSignal) -> None:
    """Write a mono float32 WAV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        wavfile.write(path, signal.sample_rate, np.asarray(signal.samples, dtype=np.float32))
    except OSError as exc:
        raise WavError(f"{path}: {exc}") from exc
