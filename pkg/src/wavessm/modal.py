"""Traveling-wave diagnostics on modal amplitude series."""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DimensionError
from .oscillator import phase_raster
from .spectral import dft_basis


@dataclass(frozen=True)
class ModalSeries:
    """Amplitudes ``mu_j(k)`` stored as an ``(N, T)`` array."""

    amplitudes: np.ndarray
    tau: float
    mode_frequencies: np.ndarray

    @property
    def N(self):
        return self.amplitudes.shape[0]

    @property
    def T(self):
        return self.amplitudes.shape[1]


def modal_amplitudes(states, basis, tau=1.0, mode_frequencies=None):
    """Project oscillator-frame states ``(T, N)`` onto the eigenmodes.

    ``mu_j(k) = <f_j | x_k>``.
    """
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    F = np.asarray(basis)
    if states.shape[1] != F.shape[0]:
        raise DimensionError(f"state size {states.shape[1]} vs basis {F.shape[0]}")
    mu = F.conj().T @ states.T
    if mode_frequencies is None:
        mode_frequencies = np.full(F.shape[0], np.nan)
    return ModalSeries(mu, tau, np.asarray(mode_frequencies, dtype=float))


def series_from_modal_states(mu_states, spectrum, tau):
    """Wrap diagonal-frame states ``(T, N)`` (already modal) with frequency labels."""
    mu_states = np.asarray(mu_states)
    return ModalSeries(mu_states.T.copy(), tau, spectrum.mode_frequencies())


def modal_energy(series):
    """``E_j = sum_k |mu_j(k)|^2``. Accepts a ModalSeries or raw ``(..., T, N)`` states."""
    if isinstance(series, ModalSeries):
        return (np.abs(series.amplitudes) ** 2).sum(axis=1)
    return (np.abs(np.asarray(series)) ** 2).sum(axis=-2)


def class_separation_scores(energies_per_class, stat="mean"):
    """Per-mode sum over class pairs of ``|stat E_j(a) - stat E_j(b)|``."""
    if len(energies_per_class) < 2:
        raise ValueError("need at least two classes")
    reduce = {"mean": np.mean, "median": np.median}[stat]
    centres = {}
    for label, energies in energies_per_class.items():
        energies = np.atleast_2d(np.asarray(energies, dtype=float))
        if energies.shape[0] == 0:
            raise ValueError(f"class {label!r} has no trials")
        centres[label] = reduce(energies, axis=0)
    score = 0.0
    for a, b in combinations(sorted(centres), 2):
        score = score + np.abs(centres[a] - centres[b])
    return score


def class_separation_ranking(energies_per_class, stat="mean"):
    """Modes sorted by separation score (descending, ties by lower index).

    Returns a list of ``(mode, score)`` with 0-based mode indices.
    """
    score = class_separation_scores(energies_per_class, stat)
    # stable sort on the negated score keeps the lower index first on ties
    order = np.argsort(-score, kind="stable")
    return [(int(j), float(score[j])) for j in order]


@dataclass(frozen=True)
class InteractionSeries:
    pair: tuple
    z: np.ndarray

    @property
    def Z(self):
        return float(np.mean(self.z))


def _check_mode(series, j):
    if not 0 <= j < series.N:
        raise IndexError(f"mode {j} out of range for N={series.N}")


def wave_interaction(series, i, j):
    """``z(k) = Re(mu_i(k) mu_j(k))``, the phase-sensitive product of two waves."""
    _check_mode(series, i)
    _check_mode(series, j)
    if i == j:
        raise ValueError("wave interaction needs two distinct modes")
    z = (series.amplitudes[i] * series.amplitudes[j]).real
    return InteractionSeries((i, j), z)


def render_field(series, basis=None, pair=None):
    """Spatiotemporal ``(T, N)`` field over the ring.

    With ``pair=(i, j)`` this is ``Re(mu_i f_i + mu_j f_j)``; otherwise the phase
    raster ``Arg(x_n(k))`` of the full reconstruction ``x = F mu``.
    """
    F = dft_basis(series.N) if basis is None else np.asarray(basis)
    if pair is None:
        x = (F @ series.amplitudes).T
        return phase_raster(x)
    for j in pair:
        _check_mode(series, j)
    cols = list(pair)
    x = (F[:, cols] @ series.amplitudes[cols]).T
    return x.real
