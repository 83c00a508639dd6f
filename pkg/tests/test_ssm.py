import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from wavessm.errors import DimensionError
from wavessm.oscillator import DynamicsOperator
from wavessm.spectral import dft_basis, reconstruct_coupling
from wavessm.ssm import (
    DiagonalSpectrum,
    discretize_zoh,
    modal_input_matrix,
    modal_step,
    oscillator_view,
    run_sequence,
    s4d_spectrum,
    step,
    unrolled_state,
    zoh_factor,
)


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def dense_zoh(d, B, tau):
    """Literal (tau K)^-1 (exp(K tau) - I) tau B with K = diag(d)."""
    K = np.diag(d)
    return np.linalg.solve(tau * K, expm(K * tau) - np.eye(len(d))) @ (tau * B)


def block_zoh(d, B, tau):
    """Top-right block of exp([[K, B], [0, 0]] tau); stays accurate as d -> 0."""
    N, m = B.shape
    M = np.zeros((N + m, N + m), dtype=complex)
    M[:N, :N] = np.diag(d)
    M[:N, N:] = B
    return expm(M * tau)[:N, N:]


def test_spectrum_examples():
    assert s4d_spectrum("lin", 5).eigenvalues[0] == -0.5 + 1j * np.pi
    N = 12
    assert np.isclose(s4d_spectrum("fout", N).eigenvalues[-1], -0.5 + 2j * np.pi, atol=1e-15)
    # 2n + 1 = N puts the n-th Inv eigenvalue on the real axis
    inv = s4d_spectrum("inv", 7).eigenvalues
    assert inv[2] == -0.5 + 0j
    assert s4d_spectrum("inv", 7, index_origin=0).eigenvalues[0].imag == pytest.approx(
        (7 / np.pi) * 6)


@pytest.mark.parametrize("variant", ["lin", "inv", "fout"])
@pytest.mark.parametrize("N", [1, 8, 64])
def test_real_part_and_common_decay(variant, N):
    spec = s4d_spectrum(variant, N)
    assert np.all(spec.eigenvalues.real == -0.5)
    disc = discretize_zoh(spec, np.ones((N, 2)), 0.01)
    assert np.max(np.abs(np.abs(disc.discrete_eigenvalues) - np.exp(-0.005))) < 1e-14


def test_mode_frequencies_lin():
    f = s4d_spectrum("lin", 64).mode_frequencies()
    assert f[29] == pytest.approx(15.0) and f[39] == pytest.approx(20.0)


def test_spectrum_is_read_only():
    spec = s4d_spectrum("lin", 4)
    with pytest.raises(ValueError):
        spec.eigenvalues[0] = 0
    with pytest.raises(ValueError):
        DiagonalSpectrum([1j], variant="bogus")


def test_zoh_examples():
    B = np.array([[1.0 + 2j, -3.0]])
    disc = discretize_zoh(DiagonalSpectrum([0.0]), B, 0.25)
    assert np.array_equal(disc.B_bar, 0.25 * B)
    disc = discretize_zoh(DiagonalSpectrum([-0.5 + 1j * np.pi]), B, 0.01)
    assert abs(abs(disc.discrete_eigenvalues[0]) - np.exp(-0.005)) < 1e-15


def test_zoh_matches_dense_oracle():
    rng = np.random.default_rng(0)
    d = -rng.uniform(0.1, 2, 8) + 1j * rng.uniform(-30, 30, 8)
    B = cplx(rng, 8, 3)
    for tau in (1e-3, 0.01, 0.3):
        got = discretize_zoh(DiagonalSpectrum(d), B, tau).B_bar
        assert np.max(np.abs(got - dense_zoh(d, B, tau))) < 1e-12
        assert np.max(np.abs(got - block_zoh(d, B, tau))) < 1e-12


def test_zoh_series_branch():
    tau = 0.01
    d = np.array([1e-9, -3e-7j, 2e-7 + 1e-7j, 5e-6, -0.5 + 1e-5j])
    assert np.sum(np.abs(d * tau) < 1e-8) == 3
    B = cplx(np.random.default_rng(1), 5, 2)
    got = discretize_zoh(DiagonalSpectrum(d), B, tau).B_bar
    assert np.max(np.abs(got - block_zoh(d, B, tau))) < 1e-12
    mpmath.mp.dps = 40
    for dj, fj in zip(d, zoh_factor(d, tau)):
        z = mpmath.mpc(dj.real, dj.imag)
        ref = complex(mpmath.expm1(z * tau) / z)
        assert abs(fj - ref) < 1e-17


def test_zoh_first_order_limit():
    d = s4d_spectrum("lin", 8).eigenvalues
    B = cplx(np.random.default_rng(2), 8, 3)
    ratios = []
    for tau in (1e-2, 1e-3, 1e-4):
        Bbar = discretize_zoh(DiagonalSpectrum(d), B, tau).B_bar
        ratios.append(np.max(np.abs(Bbar - tau * B)) / tau**2)
    # the second-order coefficient is d B / 2, so the ratio settles rather than grows
    assert max(ratios) < np.max(np.abs(d[:, None] * B)) / 2 * 1.1


def test_discretization_errors():
    spec = s4d_spectrum("lin", 4)
    with pytest.raises(ValueError):
        discretize_zoh(spec, np.ones((4, 2)), 0.0)
    with pytest.raises(DimensionError):
        discretize_zoh(spec, np.ones((3, 2)), 0.1)
    disc = discretize_zoh(spec, np.ones((4, 2)), 0.1)
    with pytest.raises(DimensionError):
        step(np.zeros(4), disc, np.ones(3))
    with pytest.raises(DimensionError):
        unrolled_state(None, disc, np.ones((3, 2)), 4)


@pytest.fixture
def disc8():
    rng = np.random.default_rng(3)
    return discretize_zoh(s4d_spectrum("lin", 8), cplx(rng, 8, 3), 0.01)


def test_step_examples(disc8):
    assert np.array_equal(step(np.zeros(8), disc8, np.zeros(3)), np.zeros(8))
    x = cplx(np.random.default_rng(4), 8)
    assert np.allclose(step(x, disc8, np.zeros(3)), disc8.discrete_eigenvalues * x, atol=0)


def test_three_steps_equal_unrolled():
    rng = np.random.default_rng(5)
    disc = discretize_zoh(s4d_spectrum("lin", 4), cplx(rng, 4, 2), 0.1)
    u = rng.standard_normal((3, 2))
    x0 = cplx(rng, 4)
    x = x0
    for k in range(3):
        x = step(x, disc, u[k])
    assert np.max(np.abs(x - unrolled_state(x0, disc, u, 3))) < 1e-14


def test_run_sequence_examples(disc8):
    assert run_sequence(None, disc8, np.zeros((0, 3))).shape == (0, 8)
    u = np.zeros((20, 3))
    u[0, 0] = 1.0
    xs = run_sequence(None, disc8, u)
    k = np.arange(20)[:, None]
    ref = disc8.discrete_eigenvalues[None, :] ** k * disc8.B_bar[:, 0][None, :]
    assert np.max(np.abs(xs - ref)) < 1e-14


def test_unrolled_examples(disc8):
    x0 = cplx(np.random.default_rng(6), 8)
    u = np.random.default_rng(7).standard_normal((10, 3))
    assert np.array_equal(unrolled_state(x0, disc8, u, 0), x0)
    zero = unrolled_state(x0, disc8, np.zeros((10, 3)), 10)
    assert np.allclose(zero, disc8.discrete_eigenvalues**10 * x0, rtol=1e-14)


@pytest.mark.parametrize("N,T", [(8, 50), (64, 1000)])
def test_recurrence_equals_unrolled(N, T):
    rng = np.random.default_rng(N)
    disc = discretize_zoh(s4d_spectrum("lin", N), cplx(rng, N, 4) / np.sqrt(N), 0.01)
    u = rng.standard_normal((T, 4))
    x0 = cplx(rng, N)
    xs = run_sequence(x0, disc, u)
    assert np.max(np.abs(xs[-1] - unrolled_state(x0, disc, u, T))) < 1e-9


def test_run_sequence_batches():
    rng = np.random.default_rng(8)
    disc = discretize_zoh(s4d_spectrum("fout", 6), cplx(rng, 6, 2), 0.05)
    u = rng.standard_normal((3, 15, 2))
    batched = run_sequence(None, disc, u)
    for b in range(3):
        assert np.array_equal(batched[b], run_sequence(None, disc, u[b]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_run_sequence_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    disc = discretize_zoh(s4d_spectrum("inv", 5), cplx(rng, 5, 2), 0.02)
    u, v = rng.standard_normal((2, 12, 2))
    lhs = run_sequence(None, disc, a * u + b * v)
    rhs = a * run_sequence(None, disc, u) + b * run_sequence(None, disc, v)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_modal_step_examples(disc8):
    e1 = np.zeros(8, dtype=complex)
    e1[0] = 1
    b = np.zeros((8, 3), dtype=complex)
    assert np.allclose(modal_step(e1, disc8, np.zeros(3), b), disc8.discrete_eigenvalues[0] * e1)
    b[5] = [1, 2j, -1]
    out = modal_step(np.zeros(8), disc8, np.array([1.0, 1.0, 1.0]), b)
    assert np.flatnonzero(out).tolist() == [5]
    with pytest.raises(DimensionError):
        modal_step(e1, disc8, np.zeros(3), b[:4])


@pytest.mark.parametrize("N,T", [(8, 40), (64, 1000)])
def test_oscillator_frame_matches_modal_recurrence(N, T):
    # oscillator frame: x_k = exp(K tau) x_{k-1} + (F B_bar) u_k with K = F diag(d) F^H
    rng = np.random.default_rng(9 + N)
    spec = s4d_spectrum("lin", N)
    disc = discretize_zoh(spec, cplx(rng, N, 3) / np.sqrt(N), 0.01)
    F = dft_basis(N)
    D = DynamicsOperator(reconstruct_coupling(spec.eigenvalues, F), 0.01)
    B_osc = F @ disc.B_bar
    u = rng.standard_normal((T, 3))
    x = np.zeros(N, dtype=complex)
    mu = np.zeros(N, dtype=complex)
    b_tilde = modal_input_matrix(B_osc, F)
    for k in range(T):
        x = D(x) + B_osc @ u[k]
        mu = modal_step(mu, disc, u[k], b_tilde)
    assert np.max(np.abs(F.conj().T @ x - mu)) < 1e-9
    assert np.max(np.abs(oscillator_view(mu, F) - x)) < 1e-9
    # the diagonal recurrence itself stores the modal amplitudes
    assert np.max(np.abs(run_sequence(None, disc, u)[-1] - mu)) < 1e-12
