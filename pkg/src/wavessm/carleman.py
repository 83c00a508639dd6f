"""Nonlinear decoder: feature mixing, GELU, and its polynomial (Carleman) lift.

Two independent routes evaluate a truncated readout:

* :func:`output_operator` with a :class:`CarlemanCoefficients` activation applies
  the polynomial elementwise to the features ``y_k = Re(C x_k)``;
* :func:`truncated_output` never forms ``y``. It expands each power ``y^r`` with
  the binomial theorem in the complex scalars ``A = alpha @ mu`` and their
  conjugates, which exposes the products of wave amplitudes.
"""

from dataclasses import dataclass, replace
from math import comb

import numpy as np
from scipy.special import erf

from .errors import DegenerateMarginError, DimensionError, FitError, UnsupportedTaskError
from .spectral import dft_basis

SQRT2 = np.sqrt(2.0)

DEFAULT_DOMAIN = (-4.0, 4.0)
DEFAULT_SAMPLES = 257
#: condition-number ceiling for the weighted Chebyshev design matrix
MAX_CONDITION = 1e12


def gelu(x, approximate=False):
    x = np.asarray(x, dtype=float)
    if approximate:
        return 0.5 * x * (1 + np.tanh(np.sqrt(2 / np.pi) * (x + 0.044715 * x**3)))
    return 0.5 * x * (1 + erf(x / SQRT2))


def gelu_grad(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1 + erf(x / SQRT2)) + x * np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)


def identity(x):
    return np.asarray(x, dtype=float)


# --- feature mixing -------------------------------------------------------------


def mode_coefficients(C, basis=None):
    """``alpha[l, i] = [C f_i]_l``: how strongly wave ``i`` feeds feature ``l``."""
    C = np.asarray(C, dtype=complex)
    F = dft_basis(C.shape[1]) if basis is None else basis
    return C @ F


def mix_features(states, C):
    """``y_k = Re(C x_k)`` for oscillator-frame states of shape ``(..., T, N)``."""
    states = np.asarray(states)
    C = np.asarray(C)
    if states.shape[-1] != C.shape[1]:
        raise DimensionError(f"states have N={states.shape[-1]}, C expects {C.shape[1]}")
    return (states @ C.T).real


def mix_features_modal(mu, alpha):
    """Same features from modal amplitudes: ``y = 1/2 sum_i (mu_i c_i + conj)``."""
    s = np.asarray(mu) @ np.asarray(alpha).T
    return 0.5 * (s + s.conj()).real


# --- polynomial fit ---------------------------------------------------------------


def chebyshev_nodes(n):
    """First-kind Chebyshev nodes on [-1, 1], ascending."""
    k = np.arange(n)
    return np.cos(np.pi * (k + 0.5) / n)[::-1].copy()


def chebyshev_vander(s, degree):
    """Columns ``T_0(s) .. T_K(s)`` built with the three-term recurrence."""
    s = np.asarray(s, dtype=float)
    V = np.empty(s.shape + (degree + 1,))
    V[..., 0] = 1.0
    if degree >= 1:
        V[..., 1] = s
    for k in range(1, degree):
        V[..., k + 1] = 2 * s * V[..., k] - V[..., k - 1]
    return V


def chebyshev_to_monomial(cheb):
    """Power-series coefficients of ``sum_k c_k T_k(s)`` in ``s``."""
    K = len(cheb) - 1
    prev, cur = np.zeros(K + 1), np.zeros(K + 1)
    prev[0] = 1.0
    out = cheb[0] * prev
    if K >= 1:
        cur[1] = 1.0
        out = out + cheb[1] * cur
    for k in range(1, K):
        nxt = -prev.copy()
        nxt[1:] += 2 * cur[:-1]
        prev, cur = cur, nxt
        out = out + cheb[k + 1] * cur
    return out


def _rescale_monomial(poly_s, lo, hi):
    # substitute s = (2y - (lo + hi)) / (hi - lo) = p*y + q and expand
    p = 2.0 / (hi - lo)
    q = -(hi + lo) / (hi - lo)
    K = len(poly_s) - 1
    out = np.zeros(K + 1)
    for n, c in enumerate(poly_s):
        for r in range(n + 1):
            out[r] += c * comb(n, r) * p**r * q ** (n - r)
    return out


@dataclass(frozen=True)
class CarlemanCoefficients:
    """Monomial coefficients ``a_0..a_R`` of a polynomial stand-in for GELU.

    Inputs are clipped to ``domain`` before evaluation unless ``clip`` is off.
    """

    coeffs: np.ndarray
    domain: tuple = DEFAULT_DOMAIN
    clip: bool = True
    chebyshev: np.ndarray = None
    max_error: float = float("nan")

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def truncate(self, R):
        """Keep ``a_0..a_R`` (no refit)."""
        return replace(self, coeffs=np.asarray(self.coeffs[: R + 1]), chebyshev=None)

    def __call__(self, y):
        return carleman_activation(y, self)


def chebyshev_fit(func, degree, domain=DEFAULT_DOMAIN, n_samples=DEFAULT_SAMPLES,
                  samples=None, weights=None, clip=True):
    """Weighted least-squares fit of ``func`` in the Chebyshev basis.

    Samples default to ``n_samples`` Chebyshev nodes mapped onto ``domain`` with
    uniform weights. Pass ``samples`` (points in the original domain, clipped)
    to fit against an empirical feature distribution instead.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    lo, hi = map(float, domain)
    if not hi > lo:
        raise ValueError(f"empty fit domain {domain}")
    if samples is None:
        s = chebyshev_nodes(n_samples)
    else:
        y = np.clip(np.asarray(samples, dtype=float).ravel(), lo, hi)
        s = (2 * y - (lo + hi)) / (hi - lo)
    y = 0.5 * (hi - lo) * s + 0.5 * (hi + lo)
    w = np.ones_like(s) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != s.shape or np.any(w < 0):
        raise ValueError("weights must be non-negative, one per sample")
    sw = np.sqrt(w)
    V = chebyshev_vander(s, degree) * sw[:, None]
    cond = np.linalg.cond(V) if V.shape[0] >= V.shape[1] else np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FitError(f"degree {degree} fit is ill-conditioned (cond={cond:.3g}); lower the degree")
    cheb, *_ = np.linalg.lstsq(V, func(y) * sw, rcond=None)
    coeffs = _rescale_monomial(chebyshev_to_monomial(cheb), lo, hi)
    grid = np.linspace(lo, hi, 10_001)
    err = float(np.max(np.abs(np.polyval(coeffs[::-1], grid) - func(grid))))
    return CarlemanCoefficients(coeffs, (lo, hi), clip, cheb, err)


def chebyshev_fit_gelu(degree, domain=DEFAULT_DOMAIN, **kwargs):
    return chebyshev_fit(gelu, degree, domain, **kwargs)


def carleman_activation(y, coeffs):
    """Elementwise ``sum_r a_r y^r`` after clipping to the fit domain."""
    y = np.asarray(y, dtype=float)
    if coeffs.clip:
        y = np.clip(y, *coeffs.domain)
    out = np.zeros_like(y)
    power = np.ones_like(y)
    for r, a in enumerate(coeffs.coeffs):
        if r:
            power = power * y
        out = out + a * power
    return out


def selection_operator(d, r):
    """``S_r`` of shape ``(d, d**r)`` picking the diagonal of ``y^{(x) r}``."""
    S = np.zeros((d, d**r))
    for l in range(d):
        S[l, sum(l * d**p for p in range(r))] = 1.0
    return S


def carleman_lift(y, R):
    """Stacked tensor powers ``[1, y, y(x)y, ...]`` up to order ``R`` (small ``d`` only)."""
    y = np.asarray(y, dtype=float)
    blocks, cur = [np.ones(1)], np.ones(1)
    for _ in range(R):
        cur = np.kron(cur, y)
        blocks.append(cur)
    return blocks


def tensor_lift_activation(y, coeffs, R=None):
    """``H_R z(y)`` with explicit selection operators; an oracle for tiny widths."""
    y = np.asarray(y, dtype=float)
    d = y.size
    R = coeffs.degree if R is None else R
    if d > 4 or R > 3:
        raise ValueError("tensor lift is only materialised for d <= 4, R <= 3")
    if coeffs.clip:
        y = np.clip(y, *coeffs.domain)
    z = carleman_lift(y, R)
    H = [coeffs.coeffs[0] * np.ones((d, 1))]
    H += [coeffs.coeffs[r] * selection_operator(d, r) for r in range(1, R + 1)]
    return sum(h @ blk for h, blk in zip(H, z))


# --- readout ----------------------------------------------------------------------


def _activation_fn(activation):
    if activation is None or activation == "gelu":
        return gelu
    if activation == "identity":
        return identity
    if activation == "gelu_tanh":
        return lambda v: gelu(v, approximate=True)
    if callable(activation):
        return activation
    raise ValueError(f"unknown activation {activation!r}")


def output_operator(states, C, W, activation="gelu"):
    """``O = W mean_k act(Re(C x_k))`` for states of shape ``(..., T, N)``."""
    states = np.asarray(states)
    if states.shape[-2] == 0:
        raise ValueError("need at least one time step")
    W = np.asarray(W, dtype=float)
    h = _activation_fn(activation)(mix_features(states, C))
    return h.mean(axis=-2) @ W.T


def modal_monomial_expansion(mu_k, alpha, r, m):
    """The ``(r, m)`` binomial term ``2^-r C(r,m) A^m conj(A)^(r-m)`` per feature.

    ``A_l = sum_i alpha[l, i] mu_i``. The individual term is complex; the sum over
    ``m = 0..r`` is real and equals ``y^r``.
    """
    if not 0 <= m <= r:
        raise ValueError("need 0 <= m <= r")
    A = np.asarray(mu_k) @ np.asarray(alpha).T
    return 2.0**-r * comb(r, m) * A**m * A.conj() ** (r - m)


def feature_power(mu_k, alpha, r):
    """``y^r`` assembled from the binomial terms."""
    total = sum(modal_monomial_expansion(mu_k, alpha, r, m) for m in range(r + 1))
    return np.real(total) if r else np.ones(np.asarray(alpha).shape[0])


def truncated_output(mu, alpha, W, coeffs, R=None):
    """Order-``R`` Carleman readout built from modal products.

    ``mu`` has shape ``(..., T, N)``. No clipping is possible on this route, so it
    matches the activation route only where features stay inside the fit domain.
    """
    mu = np.asarray(mu)
    W = np.asarray(W, dtype=float)
    R = coeffs.degree if R is None else R
    if R > coeffs.degree:
        raise ValueError(f"order {R} exceeds fitted degree {coeffs.degree}")
    A = mu @ np.asarray(alpha).T
    Abar = A.conj()
    T = mu.shape[-2]
    pooled = np.zeros(A.shape[:-2] + A.shape[-1:], dtype=complex)
    for r in range(R + 1):
        inner = 0.0
        for m in range(r + 1):
            inner = inner + comb(r, m) * A**m * Abar ** (r - m)
        pooled = pooled + coeffs.coeffs[r] * 2.0**-r * inner.sum(axis=-2)
    return (pooled.real / T) @ W.T


# --- margin analysis ---------------------------------------------------------------


@dataclass
class MarginReport:
    """Full-model vs approximated margins over the analysed samples."""

    full: np.ndarray
    approx: np.ndarray
    fraction: float
    fraction_mean_of_ratios: float


def decided_margins(logits, decision):
    """``O_decided - O_other`` for a two-class logit array ``(n, 2)``."""
    logits = np.asarray(logits)
    idx = np.arange(len(decision))
    return logits[idx, decision] - logits[idx, 1 - decision]


def margin_fraction(full_logits, approx_logits):
    """Explained fraction of the mean margin, signed by the full model's decision."""
    full_logits = np.atleast_2d(np.asarray(full_logits, dtype=float))
    approx_logits = np.atleast_2d(np.asarray(approx_logits, dtype=float))
    if full_logits.shape[-1] != 2:
        raise UnsupportedTaskError("margin analysis needs exactly two classes")
    decision = np.argmax(full_logits, axis=1)
    full = decided_margins(full_logits, decision)
    approx = decided_margins(approx_logits, decision)
    mean_full = full.mean() if full.size else 0.0
    if mean_full == 0 or not np.isfinite(mean_full):
        raise DegenerateMarginError("mean full-model margin is zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(full != 0, approx / full, np.nan)
    mor = float(np.nanmean(ratios)) if np.any(np.isfinite(ratios)) else float("nan")
    return MarginReport(full, approx, float(approx.mean() / mean_full), mor)
