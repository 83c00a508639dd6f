"""DFT eigenbasis, circulant matrices and coupling reconstruction.

Storage is 0-based: entry ``F[j, s] = exp(-2i*pi*j*s/N) / sqrt(N)``, which is the
1-based formula with ``(j-1)(s-1)`` shifted down. Column ``s`` of ``F`` is the
traveling-wave eigenmode with spatial frequency ``s`` cycles per ring, shared by
every circulant matrix of size ``N``.
"""

import numpy as np

from .errors import DimensionError

#: absolute tolerance used by :func:`is_circulant`
CIRCULANT_TOL = 1e-10


def dft_basis(N):
    """Unitary DFT matrix of size ``N`` (dense)."""
    N = int(N)
    if N < 1:
        raise DimensionError(f"basis size must be >= 1, got {N}")
    idx = np.arange(N)
    # reduce the exponent mod N before scaling to keep the phase argument small
    phase = np.outer(idx, idx) % N
    return np.exp(-2j * np.pi * phase / N) / np.sqrt(N)


def _as_generator(c):
    c = np.asarray(c, dtype=complex)
    if c.ndim != 1 or c.size == 0:
        raise DimensionError("generator must be a non-empty 1-D vector")
    return c


def circulant_from_generator(c):
    """Dense circulant whose row ``r`` is ``c`` rotated right by ``r``."""
    c = _as_generator(c)
    N = c.size
    idx = np.arange(N)
    return c[(idx[None, :] - idx[:, None]) % N]


def circulant_eigenvalues(c):
    """Eigenvalues of ``circulant_from_generator(c)``, ordered like the columns of F.

    This is the (unnormalised) DFT of the generator.
    """
    c = _as_generator(c)
    return np.fft.fft(c)


def circulant_eigenvalues_dense(c):
    """Same as :func:`circulant_eigenvalues` but via the materialised basis."""
    c = _as_generator(c)
    return np.sqrt(c.size) * (dft_basis(c.size) @ c)


def circulant_residual(M):
    """Max deviation of ``M`` from the circulant built from its first row."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("circulant check needs a square matrix")
    return float(np.max(np.abs(M - circulant_from_generator(M[0]))))


def is_circulant(M, tol=CIRCULANT_TOL):
    return circulant_residual(M) < tol


def reconstruct_coupling(eigenvalues, basis=None):
    """Coupling matrix ``K = F diag(d) F^H`` of the oscillator ring with spectrum ``d``."""
    d = np.asarray(eigenvalues, dtype=complex)
    if d.ndim != 1:
        raise DimensionError("spectrum must be a 1-D vector")
    F = dft_basis(d.size) if basis is None else np.asarray(basis)
    if F.shape != (d.size, d.size):
        raise DimensionError(f"spectrum length {d.size} does not match basis {F.shape}")
    return (F * d) @ F.conj().T


def coupling_fields(K):
    """Split a coupling matrix into magnitude and phase (Arg in (-pi, pi]) fields."""
    K = np.asarray(K)
    phase = np.angle(K)
    phase[phase <= -np.pi] = np.pi
    return np.abs(K), phase


def ring_distance_profile(K):
    """``|k_{1, 1+m}|`` for ``m = 0..N-1`` (first row of the magnitude field)."""
    return np.abs(np.asarray(K)[0])
