"""Complex-phase oscillator network on a ring and its exact solution.

The network evolves as::

    dpsi_i/dt = omega + kappa * sum_j a_ij (sin(psi_j - psi_i - phi_ij)
                                           - i cos(psi_j - psi_i - phi_ij))

With ``x = exp(i psi)`` this becomes the linear system ``dx/dt = K x`` (rotating
frame), ``k_ij = kappa * exp(-i phi_ij) * a_ij``, so ``x(t) = expm(K t) x(0)``.
Everything here works in the rotating frame; ``omega`` only enters through
:func:`rhs_eval` and the ``omega`` argument of :func:`exact_propagate`.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, DivergenceError, SingularModulusError
from .spectral import circulant_from_generator

#: default RK4 step for oracle runs
RK4_DT = 1e-4


@dataclass(frozen=True)
class OscillatorParams:
    adjacency: np.ndarray
    phase_lags: np.ndarray
    kappa: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        phi = np.broadcast_to(np.asarray(self.phase_lags, dtype=float), a.shape)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency must be square, got {a.shape}")
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "phase_lags", np.array(phi))

    @property
    def N(self):
        return self.adjacency.shape[0]


def ring_adjacency(N, n, weight=None):
    """Ring with connections to the ``n`` nearest neighbours on each side.

    ``weight`` defaults to ``1 / (2n)`` so that every row sums to one.
    """
    if n < 0 or 2 * n >= N:
        raise DimensionError(f"neighbourhood {n} too large for ring of {N}")
    g = np.zeros(N)
    w = 1.0 / (2 * n) if weight is None and n > 0 else (weight or 0.0)
    for m in range(1, n + 1):
        g[m] = g[-m] = w
    return circulant_from_generator(g).real


def ring_network(N, n, kappa, lag, omega=0.0, weight=None):
    """Homogeneous-lag ring: every connection carries the same phase lag."""
    a = ring_adjacency(N, n, weight)
    return OscillatorParams(a, np.full((N, N), float(lag)), kappa=kappa, omega=omega)


def coupling_matrix(params):
    return params.kappa * np.exp(-1j * params.phase_lags) * params.adjacency


def _check_square(K, x):
    K = np.asarray(K, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or x.shape[-1] != K.shape[0]:
        raise DimensionError(f"state of shape {x.shape} incompatible with K {K.shape}")
    return K, x


def exact_propagate(x0, K, t, omega=0.0):
    """``expm(K t) x0``; pass ``omega`` to get the non-rotating frame."""
    K, x0 = _check_square(K, x0)
    if t < 0:
        raise ValueError("t must be non-negative")
    x = expm(K * t) @ x0
    if omega:
        x = x * np.exp(1j * omega * t)
    return x


def to_phase(x):
    """Phase coordinates ``psi = Arg(x) - i log|x|`` with Arg in (-pi, pi]."""
    x = np.asarray(x, dtype=complex)
    mod = np.abs(x)
    if np.any(mod == 0):
        raise SingularModulusError("zero-modulus component; log|x| undefined")
    arg = np.angle(x)
    arg = np.where(arg <= -np.pi, np.pi, arg)
    return arg - 1j * np.log(mod)


def from_phase(psi):
    return np.exp(1j * np.asarray(psi, dtype=complex))


def phase_solution(psi0, K, t):
    """Exact phase trajectory point ``psi(t)`` from ``psi(0)``."""
    return to_phase(exact_propagate(from_phase(psi0), K, t))


def rhs_eval(psi, params):
    """Right-hand side of the phase equation, evaluated term by term."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (params.N,):
        raise DimensionError(f"phase vector {psi.shape} vs network of {params.N}")
    theta = psi[None, :] - psi[:, None] - params.phase_lags
    coupling = params.adjacency * (np.sin(theta) - 1j * np.cos(theta))
    return params.omega + params.kappa * coupling.sum(axis=1)


def _rhs_factored(psi, K):
    # sin(t) - i cos(t) = -i exp(i t), so the sum factors through K exp(i psi)
    x = np.exp(1j * psi)
    return -1j * np.exp(-1j * psi) * (K @ x)


def numeric_integrate(psi0, params, t_end, dt=RK4_DT):
    """Fixed-step classical RK4 on the phase equation in the rotating frame.

    Independent of the matrix exponential; used as an oracle in tests.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    K = coupling_matrix(params)
    psi = np.array(psi0, dtype=complex)
    n_steps = int(round(t_end / dt))
    if n_steps == 0:
        return psi
    h = t_end / n_steps
    for _ in range(n_steps):
        k1 = _rhs_factored(psi, K)
        k2 = _rhs_factored(psi + 0.5 * h * k1, K)
        k3 = _rhs_factored(psi + 0.5 * h * k2, K)
        k4 = _rhs_factored(psi + h * k3, K)
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(psi)):
        raise DivergenceError("RK4 produced a non-finite state")
    return psi


class DynamicsOperator:
    """One-step propagator ``D_tau = expm(K tau)``, computed once and reused."""

    def __init__(self, K, tau):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.K = np.asarray(K, dtype=complex)
        self.tau = float(tau)
        self.matrix = expm(self.K * self.tau)

    def __call__(self, x_prev):
        _, x_prev = _check_square(self.K, x_prev)
        return self.matrix @ x_prev

    def run(self, x0, n_steps):
        """States ``x_1..x_n`` as an ``(n, N)`` array."""
        out = np.empty((n_steps, self.K.shape[0]), dtype=complex)
        x = np.asarray(x0, dtype=complex)
        for k in range(n_steps):
            x = self.matrix @ x
            out[k] = x
        return out


def discrete_step(x_prev, K, tau):
    return DynamicsOperator(K, tau)(x_prev)


def phase_raster(states):
    """Arg of each node per time step, rows = time, columns = nodes."""
    arg = np.angle(np.asarray(states))
    return np.where(arg <= -np.pi, np.pi, arg)


def spatial_mode_power(states):
    """Fraction of spatial spectral power per wavenumber, pooled over time.

    Computed on the unit phasors ``exp(i Arg x)`` so only the phase pattern counts.
    """
    z = np.exp(1j * phase_raster(states))
    power = (np.abs(np.fft.fft(z, axis=1)) ** 2).sum(axis=0)
    return power / power.sum()


def traveling_wave_score(states):
    """(dominant nonzero wavenumber, its share of spatial power)."""
    frac = spatial_mode_power(states)
    m = int(np.argmax(frac[1:])) + 1
    return m, float(frac[m])
