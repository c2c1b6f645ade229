import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregpr.errors import InvalidConfigurationError, InvalidInputError, NumericIntegrityError
from bregpr.stft import (StftPlan, TimeSignal, check_duality, from_full, hermitian_deviation,
                         imag_residual, istft, istft_complex, make_plan, rectangular_window,
                         sine_bell_window, stft, tf_inner, tf_norm, to_full)

from oracles import dense_stft, dense_stft_matrix, num_frames, padded_length, sine_bell

ROUND_TRIP_TOL = 1e-10
PARSEVAL_TOL = 1e-10
DUALITY_TOL = 1e-10


def test_sine_bell_matches_definition():
    np.testing.assert_allclose(sine_bell_window(1024).coefficients, sine_bell(1024), rtol=0, atol=1e-15)


@pytest.mark.parametrize("T", [0, 3, 1023, -4])
def test_sine_bell_rejects_odd_or_empty(T):
    with pytest.raises(InvalidConfigurationError):
        sine_bell_window(T)


def test_sine_bell_is_self_dual_at_half_overlap():
    w = sine_bell_window(1024).coefficients
    ok, dev = check_duality(w, w, 512)
    assert ok and dev <= DUALITY_TOL


def test_rectangular_window_is_not_dual_with_half_overlap():
    w = rectangular_window(16).coefficients
    ok, dev = check_duality(w, w, 8)
    assert not ok
    assert dev == pytest.approx(1.0)


def test_dense_matrix_agrees_with_fast_transform(small_plan, rng):
    T, H, N, M = 16, 8, small_plan.num_frames, small_plan.fft_size
    A = dense_stft_matrix(T, H, N, M, sine_bell(T))
    x = rng.standard_normal(small_plan.padded_length)
    X_full = dense_stft(A, x, M, N)
    np.testing.assert_allclose(to_full(small_plan, stft(small_plan, x)), X_full, atol=1e-13)
    # synthesis is the adjoint
    Y = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    np.testing.assert_allclose(istft_complex(small_plan, Y), A.conj().T @ Y.T.ravel(), atol=1e-13)


def test_adjoint_identity(small_plan, rng):
    x = rng.standard_normal(small_plan.padded_length)
    Y = stft(small_plan, rng.standard_normal(small_plan.padded_length))
    assert tf_inner(small_plan, stft(small_plan, x), Y) == pytest.approx(x @ istft(small_plan, Y), rel=1e-12)


def test_padding_formula_for_two_seconds():
    n = 2 * 22050
    plan = make_plan(n, 1024, 512)
    assert plan.num_frames == num_frames(n, 1024, 512) == 88
    assert plan.padded_length == padded_length(n, 1024, 512) == 45568
    assert plan.shape == (513, 88)


def test_pad_crop_round_trip_and_idempotent_pad(rng):
    plan = make_plan(1000, 64, 32)
    x = rng.standard_normal(1000)
    xp = plan.pad(x)
    assert xp.size == plan.padded_length
    assert np.all(xp[: plan.offset] == 0)
    assert np.array_equal(plan.pad(xp), xp)
    assert np.array_equal(plan.crop(xp), x)
    with pytest.raises(InvalidInputError):
        plan.pad(np.zeros(999))


def test_round_trip_and_parseval_random(rng):
    plan = make_plan(5000, 256, 128)
    x = plan.pad(rng.standard_normal(5000))
    X = stft(plan, x)
    assert np.linalg.norm(istft(plan, X) - x) <= ROUND_TRIP_TOL * np.linalg.norm(x)
    assert abs(tf_norm(plan, X) / np.linalg.norm(x) - 1) <= PARSEVAL_TOL


def test_zero_padded_fft_size(rng):
    plan = make_plan(500, 64, 32, fft_size=128)
    x = plan.pad(rng.standard_normal(500))
    X = stft(plan, x)
    assert X.shape == (65, plan.num_frames)
    np.testing.assert_allclose(istft(plan, X), x, atol=1e-12)


def test_impulse_has_flat_spectrum_in_its_frames():
    plan = make_plan(2048, 1024, 512)
    x = np.zeros(plan.padded_length)
    t0 = plan.offset + 700
    x[t0] = 1.0
    X = stft(plan, x)
    for n in range(plan.num_frames):
        rel = t0 - n * 512
        expected = sine_bell(1024)[rel] / np.sqrt(1024) if 0 <= rel < 1024 else 0.0
        np.testing.assert_allclose(np.abs(X[:, n]), expected, atol=1e-15)


def test_full_half_conversions(small_plan, rng):
    X = stft(small_plan, rng.standard_normal(small_plan.padded_length))
    F = to_full(small_plan, X)
    assert F.shape == small_plan.full_shape
    assert hermitian_deviation(F) <= 1e-15
    assert np.array_equal(from_full(small_plan, F), X)
    F[3, 2] += 1.0
    with pytest.raises(NumericIntegrityError):
        from_full(small_plan, F)


def test_istft_rejects_non_hermitian_input(small_plan, rng):
    X = stft(small_plan, rng.standard_normal(small_plan.padded_length))
    X[0, 1] += 0.5j
    assert imag_residual(small_plan, X) > 1e-8
    with pytest.raises(NumericIntegrityError):
        istft(small_plan, X)
    # full-view input with a broken mirror is caught as well
    F = to_full(small_plan, stft(small_plan, rng.standard_normal(small_plan.padded_length)))
    F[2, 3] += 1.0
    with pytest.raises(NumericIntegrityError):
        istft(small_plan, F)


def test_imag_residual_half_matches_full_complex_synthesis(small_plan, rng):
    X = stft(small_plan, rng.standard_normal(small_plan.padded_length))
    X[0] = X[0] + 1e-3j * rng.standard_normal(X.shape[1])
    z = istft_complex(small_plan, to_full(small_plan, X))
    assert imag_residual(small_plan, X) == pytest.approx(np.linalg.norm(z.imag) / np.linalg.norm(z.real), rel=1e-10)


def test_shape_errors(small_plan):
    with pytest.raises(InvalidInputError):
        stft(small_plan, np.zeros(small_plan.padded_length + 1))
    with pytest.raises(InvalidInputError):
        istft(small_plan, np.zeros((5, small_plan.num_frames)))
    with pytest.raises(InvalidInputError):
        stft(small_plan, np.zeros(small_plan.padded_length, dtype=complex))


def test_plan_validation():
    w = sine_bell_window(16)
    with pytest.raises(InvalidConfigurationError):
        StftPlan(w, 0, 4)
    with pytest.raises(InvalidConfigurationError):
        StftPlan(w, 8, 4, fft_size=8)
    with pytest.raises(InvalidConfigurationError):
        StftPlan(w, 8, 0)
    with pytest.raises(InvalidConfigurationError):
        StftPlan.for_signal(0, w, 8)


def test_time_signal_accepted_by_pad_and_stft():
    plan = make_plan(100, 16)
    sig = TimeSignal(np.ones(100), 8000)
    assert stft(plan, TimeSignal(plan.pad(sig), 8000)).shape == plan.shape


@settings(max_examples=40, deadline=None)
@given(n=st.integers(32, 400), half_T=st.sampled_from([4, 8, 16, 32]), seed=st.integers(0, 2**31))
def test_round_trip_property(n, half_T, seed):
    T = 2 * half_T
    if n < T:
        n = T
    plan = make_plan(n, T)
    x = plan.pad(np.random.default_rng(seed).standard_normal(n))
    X = stft(plan, x)
    assert np.linalg.norm(istft(plan, X) - x) <= ROUND_TRIP_TOL * np.linalg.norm(x)
    assert abs(tf_norm(plan, X) - np.linalg.norm(x)) <= PARSEVAL_TOL * np.linalg.norm(x)


def test_frame_is_tight_on_the_support_only(rng):
    plan = make_plan(300, 32)
    x = rng.standard_normal(plan.padded_length)
    xs = plan.restrict(x)
    np.testing.assert_allclose(istft(plan, stft(plan, xs)), xs, atol=1e-12)
    assert np.linalg.norm(istft(plan, stft(plan, x)) - x) > 1e-3
    assert plan.support == slice(plan.offset, plan.offset + 300)
    assert np.array_equal(plan.restrict(plan.pad(x[:300])), plan.pad(x[:300]))


def test_zero_signal_and_zero_matrix(small_plan):
    assert not np.any(stft(small_plan, np.zeros(small_plan.padded_length)))
    assert not np.any(istft(small_plan, np.zeros(small_plan.shape, dtype=complex)))


def test_single_frame_impulse_with_rectangular_window():
    # unitary scaling: the unnormalized row of ones becomes 1/sqrt(M)
    plan = StftPlan(rectangular_window(8), 8, 1)
    x = np.zeros(8)
    x[0] = 1.0
    np.testing.assert_allclose(to_full(plan, stft(plan, x))[:, 0], np.full(8, 1 / np.sqrt(8)), atol=1e-15)


def test_rectangular_window_is_dual_without_overlap():
    ok, dev = check_duality(rectangular_window(16).coefficients, rectangular_window(16).coefficients, 16)
    assert ok and dev == 0.0


def test_linearity_and_hermitian_symmetry(small_plan, rng):
    x, y = rng.standard_normal((2, small_plan.padded_length))
    a, b = 0.7, -2.3
    lhs = stft(small_plan, a * x + b * y)
    rhs = a * stft(small_plan, x) + b * stft(small_plan, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)
    F = to_full(small_plan, stft(small_plan, x))
    F_direct = dense_stft(dense_stft_matrix(16, 8, small_plan.num_frames, 16, sine_bell(16)), x, 16,
                          small_plan.num_frames)
    mirror = F_direct[(-np.arange(16)) % 16]
    assert np.max(np.abs(F_direct - mirror.conj())) <= 1e-12 * np.max(np.abs(F_direct))
    assert np.max(np.abs(F - F_direct)) <= 1e-12


def test_random_hermitian_matrix_synthesizes_to_real(small_plan, rng):
    Z = rng.standard_normal(small_plan.full_shape) + 1j * rng.standard_normal(small_plan.full_shape)
    F = 0.5 * (Z + Z[(-np.arange(16)) % 16].conj())
    z = istft_complex(small_plan, F)
    assert np.linalg.norm(z.imag) <= 1e-10 * np.linalg.norm(z.real)
    np.testing.assert_allclose(istft(small_plan, from_full(small_plan, F)), z.real, atol=1e-13)


def test_adjoint_with_hermitian_test_matrix(small_plan, rng):
    x = rng.standard_normal(small_plan.padded_length)
    Z = rng.standard_normal(small_plan.full_shape) + 1j * rng.standard_normal(small_plan.full_shape)
    F = 0.5 * (Z + Z[(-np.arange(16)) % 16].conj())
    lhs = np.real(np.vdot(F, to_full(small_plan, stft(small_plan, x))))
    assert lhs == pytest.approx(x @ istft(small_plan, from_full(small_plan, F)), rel=1e-10)
