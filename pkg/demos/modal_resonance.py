"""
Which traveling wave hears a 15 Hz tone?
========================================

With S4D-Lin and a 10 ms step, mode ``j`` rotates at ``j / 2`` Hz. Feeding a
sinusoid into the recurrence lights up the mode whose rotation matches it.
"""

import numpy as np

from wavessm.data import SyntheticSpec, generate_synthetic
from wavessm.modal import class_separation_ranking, modal_energy
from wavessm.model import ModelConfig, init_model, modal_states
from wavessm.ssm import discretize_zoh, run_sequence, s4d_spectrum

tau, N = 0.01, 64
spec = s4d_spectrum("lin", N)
disc = discretize_zoh(spec, np.ones((N, 1)), tau)
t = np.arange(3000) * tau

for f in (5.2, 15.1, 20.0):
    mu = run_sequence(None, disc, np.sin(2 * np.pi * f * t)[:, None])
    steady = np.abs(mu[-500:]).mean(axis=0)
    j = int(np.argmax(steady))
    print(f"{f:5.1f} Hz tone -> mode {j + 1} ({spec.mode_frequencies()[j]:.1f} Hz)")

############################################################
# On the noisy three-class data the modal energies already separate the
# classes before any training: the readout only has to learn to listen.

ds = generate_synthetic(SyntheticSpec(trials_per_class=40))
model = init_model(ModelConfig())
energies = {}
for c in (1, 2, 3):
    mu, _ = modal_states(model, ds.subset(ds.labels == c).series)
    energies[c] = modal_energy(mu)
for mode, score in class_separation_ranking(energies)[:5]:
    print(f"mode {mode + 1:2d}  {spec.mode_frequencies()[mode]:5.1f} Hz  score {score:.3f}")
