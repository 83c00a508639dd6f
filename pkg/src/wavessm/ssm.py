"""Diagonal (S4D-family) linear recurrence.

The state is stored in diagonal (modal) coordinates ``mu``. The oscillator-picture
state is the derived view ``x = F @ mu`` where ``F`` is the DFT basis; the two are
related by the coupling ``K = F diag(d) F^H`` of the equivalent ring network.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError
from .spectral import dft_basis

VARIANTS = ("lin", "inv", "fout", "custom")

#: below this |d*tau| the ZOH factor switches to its Taylor series
ZOH_SERIES_CUTOFF = 1e-8


@dataclass(frozen=True)
class DiagonalSpectrum:
    """Continuous-time eigenvalues ``d_jj`` (units of 1/time)."""

    eigenvalues: np.ndarray
    variant: str = "custom"
    index_origin: int = 1

    def __post_init__(self):
        d = np.array(self.eigenvalues, dtype=complex).ravel()
        d.setflags(write=False)
        object.__setattr__(self, "eigenvalues", d)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def N(self):
        return self.eigenvalues.size

    def mode_frequencies(self):
        """Temporal frequency of each mode in cycles per unit time (Hz for seconds)."""
        return self.eigenvalues.imag / (2 * np.pi)


def s4d_spectrum(variant, N, index_origin=1):
    """S4D-Lin / S4D-Inv / S4D-FouT eigenvalues for ``n = origin .. origin+N-1``."""
    variant = variant.lower()
    if N < 1:
        raise DimensionError("N must be >= 1")
    n = np.arange(index_origin, index_origin + N, dtype=float)
    if variant == "lin":
        imag = np.pi * n
    elif variant == "inv":
        imag = (N / np.pi) * (N / (2 * n + 1) - 1)
    elif variant == "fout":
        imag = 2 * np.pi * n / N
    else:
        raise ValueError(f"no closed form for variant {variant!r}")
    return DiagonalSpectrum(-0.5 + 1j * imag, variant, index_origin)


def zoh_factor(d, tau):
    """Elementwise ``(exp(d tau) - 1) / d``, with the ``d -> 0`` limit handled."""
    d = np.asarray(d, dtype=complex)
    z = d * tau
    small = np.abs(z) < ZOH_SERIES_CUTOFF
    safe_d = np.where(small, 1.0, d)
    out = np.expm1(z) / safe_d
    series = tau * (1 + z / 2 + z * z / 6)
    return np.where(small, series, out)


def init_input_matrix(N, d_model, rng):
    """Complex ``B`` with iid entries of total variance ``1/N``."""
    scale = np.sqrt(0.5 / N)
    return scale * (rng.standard_normal((N, d_model)) + 1j * rng.standard_normal((N, d_model)))


@dataclass(frozen=True)
class Discretization:
    spectrum: DiagonalSpectrum
    B: np.ndarray
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        B = np.asarray(self.B, dtype=complex)
        if B.ndim != 2 or B.shape[0] != self.spectrum.N:
            raise DimensionError(f"B shape {B.shape} does not match N={self.spectrum.N}")
        object.__setattr__(self, "B", B)

    @property
    def N(self):
        return self.spectrum.N

    @property
    def d_model(self):
        return self.B.shape[1]

    @cached_property
    def discrete_eigenvalues(self):
        return np.exp(self.spectrum.eigenvalues * self.tau)

    @cached_property
    def input_factor(self):
        return zoh_factor(self.spectrum.eigenvalues, self.tau)

    @cached_property
    def B_bar(self):
        return self.input_factor[:, None] * self.B


def discretize_zoh(spectrum, B, tau):
    return Discretization(spectrum, B, float(tau))


def _inputs(disc, inputs):
    u = np.asarray(inputs, dtype=float)
    if u.shape[-1] != disc.d_model:
        raise DimensionError(f"inputs have width {u.shape[-1]}, expected {disc.d_model}")
    return u


def step(x_prev, disc, u_k):
    u_k = _inputs(disc, u_k)
    return disc.discrete_eigenvalues * x_prev + disc.B_bar @ u_k


def _scan(x0, lam, drive):
    # drive: (..., T, N); returns states x_1..x_T with the same shape
    out = np.empty(drive.shape, dtype=complex)
    x = np.broadcast_to(np.asarray(x0, dtype=complex), drive.shape[:-2] + drive.shape[-1:])
    for k in range(drive.shape[-2]):
        x = lam * x + drive[..., k, :]
        out[..., k, :] = x
    return out


def run_sequence(x0, disc, inputs):
    """States ``x_1..x_T`` for inputs of shape ``(..., T, d_model)``.

    Leading batch axes are carried through. ``x0`` may be ``None`` (zero state).
    """
    u = _inputs(disc, inputs)
    if u.ndim == 1:
        raise DimensionError("inputs must be a sequence of vectors")
    if x0 is None:
        x0 = np.zeros(disc.N, dtype=complex)
    drive = u @ disc.B_bar.T
    return _scan(x0, disc.discrete_eigenvalues, drive)


def unrolled_state(x0, disc, inputs, T):
    """Closed form ``x_T = lam^T x0 + sum_j lam^(T-j) B_bar u_j``."""
    u = _inputs(disc, inputs)
    if T > u.shape[0]:
        raise DimensionError(f"T={T} exceeds input length {u.shape[0]}")
    lam = disc.discrete_eigenvalues
    x0 = np.zeros(disc.N, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    if T == 0:
        return x0.copy()
    powers = lam[None, :] ** np.arange(T - 1, -1, -1)[:, None]
    drive = u[:T] @ disc.B_bar.T
    return lam**T * x0 + (powers * drive).sum(axis=0)


def modal_input_matrix(B_bar_osc, basis=None):
    """``b_tilde = F^H B_bar`` for an oscillator-frame input projection."""
    B_bar_osc = np.asarray(B_bar_osc)
    F = dft_basis(B_bar_osc.shape[0]) if basis is None else basis
    return F.conj().T @ B_bar_osc


def modal_step(mu_prev, disc, u_k, b_tilde):
    """One independent update per traveling-wave amplitude."""
    b_tilde = np.asarray(b_tilde)
    u_k = _inputs(disc, u_k)
    if b_tilde.shape != (disc.N, disc.d_model):
        raise DimensionError(f"b_tilde shape {b_tilde.shape} mismatched")
    return disc.discrete_eigenvalues * mu_prev + b_tilde @ u_k


def oscillator_view(mu, basis=None):
    """Oscillator-frame states ``x = F mu`` (last axis is the mode axis)."""
    mu = np.asarray(mu)
    F = dft_basis(mu.shape[-1]) if basis is None else basis
    return mu @ F.T
