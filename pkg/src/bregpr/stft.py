"""Short-time Fourier transform on a Gabor frame with dual analysis/synthesis windows.

Time-frequency matrices are stored with only the ``fft_size // 2 + 1``
nonnegative-frequency rows (the STFT of a real signal is frequency-Hermitian,
``X[m, n] == conj(X[(M - m) % M, n])``, so the remaining rows are redundant).
:func:`to_full` rebuilds the complete ``M x N`` view, and every norm or inner
product in this package is taken over the full matrix through
:attr:`StftPlan.bin_weights`.

The DFT is normalized by ``1/sqrt(M)`` in both directions, so that with a
self-dual window the analysis operator ``A`` is a Parseval frame
(``A^H A = I``) and :func:`istft` is exactly ``A^H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigurationError, InvalidInputError, NumericIntegrityError

DUALITY_TOL = 1e-10
REALNESS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Real sample vector together with its sampling rate in Hz."""

    samples: np.ndarray
    sample_rate: int = 22050

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise InvalidInputError(f"expected a 1-D signal, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("signal contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise InvalidConfigurationError("sample_rate must be a positive integer")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class Window:
    coefficients: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        w = np.array(self.coefficients, dtype=float).ravel()
        if w.size < 1:
            raise InvalidConfigurationError("window must have at least one coefficient")
        if not np.all(np.isfinite(w)):
            raise InvalidConfigurationError("window coefficients must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "coefficients", w)

    def __len__(self):
        return self.coefficients.size


def sine_bell_window(length: int) -> Window:
    """Sine bell ``w(t) = sin(pi (t + 0.5) / T)``, self-dual at 50% overlap."""
    if int(length) != length or length < 2 or length % 2:
        raise InvalidConfigurationError(
            f"sine bell length must be an even integer >= 2, got {length!r}"
        )
    t = np.arange(int(length))
    return Window(np.sin(np.pi * (t + 0.5) / length), kind="sine-bell")


def rectangular_window(length: int) -> Window:
    return Window(np.ones(int(length)), kind="custom")


def _coeffs(w) -> np.ndarray:
    return w.coefficients if isinstance(w, Window) else np.asarray(w, dtype=float)


def check_duality(w, v, hop: int) -> tuple[bool, float]:
    """Check the partition-of-unity condition ``sum_n w(l - nH) v(l - nH) = 1``.

    The sum is evaluated in the interior of the signal, where every frame
    overlapping ``l`` exists, i.e. it is periodized with period ``hop``.

    Returns
    -------
    (is_dual, max_deviation)
    """
    w = _coeffs(w)
    v = _coeffs(v)
    if w.shape != v.shape:
        raise InvalidConfigurationError(
            f"analysis and synthesis windows differ in length ({w.size} vs {v.size})"
        )
    if int(hop) != hop or hop < 1:
        raise InvalidConfigurationError(f"hop must be a positive integer, got {hop!r}")
    hop = int(hop)
    prod = w * v
    n_chunks = -(-prod.size // hop)
    padded = np.zeros(n_chunks * hop)
    padded[: prod.size] = prod
    total = padded.reshape(n_chunks, hop).sum(axis=0)
    dev = float(np.max(np.abs(total - 1.0)))
    return dev <= DUALITY_TOL, dev


@dataclass(frozen=True, eq=False)
class StftPlan:
    """Immutable description of an STFT operator.

    Parameters
    ----------
    window : Window
        Analysis window of length ``T``.
    hop : int
        Frame advance ``H`` (``1 <= H <= T``).
    num_frames : int
        Number of frames ``N``; the padded signal length is ``T + (N - 1) H``.
    fft_size : int, optional
        Number of frequency channels ``M >= T``; defaults to ``T``.
    synthesis_window : Window, optional
        Defaults to the analysis window (self-dual case).
    signal_length : int, optional
        Length of the unpadded signal that :meth:`pad` accepts.
    """

    window: Window
    hop: int
    num_frames: int
    fft_size: int | None = None
    synthesis_window: Window | None = None
    signal_length: int | None = None
    padded_length: int = field(init=False)
    bin_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        T = len(self.window)
        M = T if self.fft_size is None else int(self.fft_size)
        if int(self.hop) != self.hop or not 1 <= self.hop <= T:
            raise InvalidConfigurationError(f"hop must satisfy 1 <= H <= T={T}, got {self.hop}")
        if M < T:
            raise InvalidConfigurationError(f"fft_size M={M} is smaller than the window length T={T}")
        if self.num_frames < 1:
            raise InvalidConfigurationError("num_frames must be >= 1")
        syn = self.window if self.synthesis_window is None else self.synthesis_window
        if len(syn) != T:
            raise InvalidConfigurationError("synthesis window length differs from analysis window")
        L = T + (self.num_frames - 1) * self.hop
        if self.signal_length is not None and not 0 < self.signal_length <= L - 2 * (T - self.hop):
            raise InvalidConfigurationError("signal_length does not fit in the padded frame grid")
        weights = np.full((M // 2 + 1, 1), 2.0)
        weights[0] = 1.0
        if M % 2 == 0:
            weights[-1] = 1.0
        weights.setflags(write=False)
        object.__setattr__(self, "hop", int(self.hop))
        object.__setattr__(self, "num_frames", int(self.num_frames))
        object.__setattr__(self, "fft_size", M)
        object.__setattr__(self, "synthesis_window", syn)
        object.__setattr__(self, "padded_length", L)
        object.__setattr__(self, "bin_weights", weights)

    @classmethod
    def for_signal(cls, signal_length: int, window: Window, hop: int,
                   fft_size: int | None = None, synthesis_window: Window | None = None):
        """Plan covering a signal of ``signal_length`` samples.

        The signal is preceded by ``T - H`` zeros and followed by enough zeros
        that every original sample lies where all overlapping frames exist.
        """
        T = len(window)
        if signal_length < 1:
            raise InvalidConfigurationError("signal_length must be positive")
        if not 1 <= hop <= T:
            raise InvalidConfigurationError(f"hop must satisfy 1 <= H <= T={T}, got {hop}")
        num_frames = max(1, -(-(signal_length + T - hop) // hop))
        return cls(window, hop, num_frames, fft_size, synthesis_window, signal_length)

    @property
    def window_length(self) -> int:
        return len(self.window)

    @property
    def offset(self) -> int:
        """Number of leading zeros inserted by :meth:`pad`."""
        return self.window_length - self.hop

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the stored (nonnegative-frequency) matrices."""
        return self.num_bins, self.num_frames

    @property
    def full_shape(self) -> tuple[int, int]:
        return self.fft_size, self.num_frames

    def pad(self, x) -> np.ndarray:
        """Zero-pad an unpadded signal; already padded input is returned unchanged."""
        x = np.asarray(x.samples if isinstance(x, TimeSignal) else x, dtype=float)
        if x.size == self.padded_length:
            return x
        if self.signal_length is None or x.size != self.signal_length:
            raise InvalidInputError(
                f"signal of length {x.size} matches neither the padded length "
                f"{self.padded_length} nor the plan's signal length {self.signal_length}"
            )
        out = np.zeros(self.padded_length)
        out[self.offset: self.offset + x.size] = x
        return out

    @property
    def support(self) -> slice:
        """Samples a padded signal may occupy.

        The signal's own samples when ``signal_length`` is known, otherwise
        every sample covered by a full set of overlapping frames. On this
        support ``istft(stft(x)) == x``; outside it the frame is not tight.
        """
        if self.signal_length is not None:
            return slice(self.offset, self.offset + self.signal_length)
        return slice(self.offset, self.padded_length - self.offset)

    def restrict(self, x) -> np.ndarray:
        """Zero a padded signal outside :attr:`support` (orthogonal projection)."""
        x = np.asarray(x, dtype=float)
        self._check_length(x)
        out = np.zeros_like(x)
        out[self.support] = x[self.support]
        return out

    def crop(self, x) -> np.ndarray:
        """Inverse of :meth:`pad`."""
        x = np.asarray(x.samples if isinstance(x, TimeSignal) else x, dtype=float)
        self._check_length(x)
        if self.signal_length is None:
            return x.copy()
        return x[self.offset: self.offset + self.signal_length].copy()

    def _check_length(self, x):
        if x.ndim != 1 or x.size != self.padded_length:
            raise InvalidInputError(
                f"expected a padded signal of length {self.padded_length}, got shape {x.shape}"
            )

    def _check_tf(self, X) -> bool:
        """Validate a TF matrix; return True when it is the full M-row view."""
        if X.ndim != 2 or X.shape[1] != self.num_frames:
            raise InvalidInputError(f"TF matrix shape {X.shape} does not match plan {self.shape}")
        if X.shape[0] == self.num_bins:
            return False
        if X.shape[0] == self.fft_size:
            return True
        raise InvalidInputError(f"TF matrix shape {X.shape} does not match plan {self.shape}")


def make_plan(signal_length: int, win_len: int = 1024, hop: int | None = None,
              fft_size: int | None = None) -> StftPlan:
    """Sine-bell plan with 50% overlap by default."""
    hop = win_len // 2 if hop is None else hop
    return StftPlan.for_signal(signal_length, sine_bell_window(win_len), hop, fft_size)


def stft(plan: StftPlan, x) -> np.ndarray:
    """Analysis ``X[m, n] = M^{-1/2} sum_t x(t + nH) w(t) exp(-2i pi m t / M)``.

    ``x`` must already be padded (see :meth:`StftPlan.pad`). Returns the
    ``(M // 2 + 1, N)`` nonnegative-frequency rows.
    """
    x = np.asarray(x.samples if isinstance(x, TimeSignal) else x)
    if np.iscomplexobj(x):
        raise InvalidInputError("stft expects a real signal")
    x = x.astype(float, copy=False)
    plan._check_length(x)
    T, H, M = plan.window_length, plan.hop, plan.fft_size
    frames = np.lib.stride_tricks.sliding_window_view(x, T)[::H]
    spec = np.fft.rfft(frames * plan.window.coefficients, n=M, axis=1)
    return spec.T / np.sqrt(M)


def _overlap_add(plan: StftPlan, frames: np.ndarray) -> np.ndarray:
    T, H = plan.window_length, plan.hop
    out = np.zeros(plan.padded_length, dtype=frames.dtype)
    if T % H == 0:
        # T/H interleaved passes, each one a contiguous reshape-add
        k = T // H
        N = plan.num_frames
        view = out.reshape(N + k - 1, H)
        for j in range(k):
            view[j: j + N] += frames[:, j * H:(j + 1) * H]
    else:
        for n in range(plan.num_frames):
            out[n * H: n * H + T] += frames[n]
    return out


def _imag_part_signal(plan: StftPlan, X: np.ndarray) -> np.ndarray:
    # irfft drops Im of the self-mirrored bins (DC and, for even M, Nyquist);
    # this is what the full inverse DFT would have left in the imaginary part.
    M, T = plan.fft_size, plan.window_length
    b = X[0].imag[:, None] * np.ones(T)
    if M % 2 == 0:
        b = b + X[-1].imag[:, None] * np.where(np.arange(T) % 2, -1.0, 1.0)
    return _overlap_add(plan, b * (plan.synthesis_window.coefficients / np.sqrt(M)))


def _has_mirror_imag(plan: StftPlan, X: np.ndarray) -> bool:
    if not np.iscomplexobj(X):
        return False
    return bool(X[0].imag.any() or (plan.fft_size % 2 == 0 and X[-1].imag.any()))


def imag_residual(plan: StftPlan, X) -> float:
    """Relative imaginary part that synthesizing ``X`` would produce.

    Zero exactly when ``X`` is frequency-Hermitian.
    """
    X = np.asarray(X)
    if plan._check_tf(X):
        z = istft_complex(plan, X)
        return _ratio(np.linalg.norm(z.imag), np.linalg.norm(z.real))
    if not _has_mirror_imag(plan, X):
        return 0.0
    return _ratio(np.linalg.norm(_imag_part_signal(plan, X)),
                  np.linalg.norm(_istft_half(plan, X)))


def _istft_half(plan: StftPlan, X: np.ndarray) -> np.ndarray:
    M, T = plan.fft_size, plan.window_length
    frames = np.fft.irfft(X.T, n=M, axis=1)[:, :T] * np.sqrt(M)
    return _overlap_add(plan, frames * plan.synthesis_window.coefficients)


def istft(plan: StftPlan, X, rtol: float = REALNESS_TOL) -> np.ndarray:
    """Overlap-add synthesis with the plan's synthesis window; returns a real signal.

    ``X`` may be the stored half matrix or the full ``M x N`` view. The
    imaginary residual of the synthesized signal is checked against ``rtol``
    before it is discarded.

    Raises
    ------
    NumericIntegrityError
        If ``X`` is not frequency-Hermitian to within ``rtol``.
    """
    X = np.asarray(X)
    full = plan._check_tf(X)
    if not np.all(np.isfinite(X)):
        raise NumericIntegrityError("TF matrix contains non-finite entries")
    if full:
        z = istft_complex(plan, X)
        res = _ratio(np.linalg.norm(z.imag), np.linalg.norm(z.real))
        out = z.real
    else:
        out = _istft_half(plan, X)
        res = 0.0
        if _has_mirror_imag(plan, X):
            res = _ratio(np.linalg.norm(_imag_part_signal(plan, X)), np.linalg.norm(out))
    if res > rtol:
        raise NumericIntegrityError(
            f"synthesized signal has relative imaginary residual {res:.3e} > {rtol:.1e}"
        )
    return out


def _ratio(num, den) -> float:
    if num == 0:
        return 0.0
    return float(num / den) if den > 0 else float("inf")


def istft_complex(plan: StftPlan, X_full) -> np.ndarray:
    """Complex synthesis from the full ``M x N`` matrix (no realness assumption)."""
    X_full = np.asarray(X_full)
    if X_full.shape != plan.full_shape:
        raise InvalidInputError(f"expected full shape {plan.full_shape}, got {X_full.shape}")
    M, T = plan.fft_size, plan.window_length
    frames = np.fft.ifft(X_full.T, n=M, axis=1)[:, :T] * np.sqrt(M)
    return _overlap_add(plan, frames * plan.synthesis_window.coefficients)


def to_full(plan: StftPlan, X) -> np.ndarray:
    """Expand stored rows to the full frequency-Hermitian ``M x N`` matrix."""
    X = np.asarray(X)
    if plan._check_tf(X):
        return X.copy()
    M = plan.fft_size
    mirror = np.conj(X[1: M - plan.num_bins + 1][::-1])
    return np.concatenate([X, mirror], axis=0)


def from_full(plan: StftPlan, X_full, rtol: float = 1e-10) -> np.ndarray:
    """Keep the nonnegative-frequency rows of a frequency-Hermitian matrix."""
    X_full = np.asarray(X_full)
    if X_full.shape != plan.full_shape:
        raise InvalidInputError(f"expected full shape {plan.full_shape}, got {X_full.shape}")
    dev = hermitian_deviation(X_full)
    if dev > rtol:
        raise NumericIntegrityError(f"matrix is not frequency-Hermitian (deviation {dev:.3e})")
    return X_full[: plan.num_bins].copy()


def hermitian_deviation(X_full) -> float:
    """``max |X[m] - conj(X[(M - m) % M])| / max |X|`` over the full matrix."""
    X_full = np.asarray(X_full)
    mirror = np.conj(np.roll(X_full[::-1], 1, axis=0))
    scale = np.max(np.abs(X_full)) if X_full.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(X_full - mirror)) / scale)


def tf_norm(plan: StftPlan, X) -> float:
    """Frobenius norm of the full matrix represented by stored rows ``X``."""
    return float(np.sqrt(np.sum(plan.bin_weights * np.abs(X) ** 2)))


def tf_inner(plan: StftPlan, X, Y) -> float:
    """Real inner product ``Re <X, Y>`` of the full matrices."""
    return float(np.sum(plan.bin_weights * (np.conj(X) * Y).real))
