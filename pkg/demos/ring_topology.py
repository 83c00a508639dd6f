"""
Coupling topology of an S4D-Lin layer
=====================================

A diagonal SSM with eigenvalues ``d`` is the same linear system as a ring of
oscillators coupled through ``K = F diag(d) F^H``. Here we look at how strongly
node 0 talks to its neighbours.
"""

import numpy as np

from wavessm.spectral import circulant_residual, coupling_fields, reconstruct_coupling
from wavessm.ssm import s4d_spectrum

N = 64
K = reconstruct_coupling(s4d_spectrum("lin", N).eigenvalues)
magnitude, phase = coupling_fields(K)

############################################################
# Every row is a rotation of the first one, so the network is a ring.

print("circulant residual:", circulant_residual(K))

############################################################
# Coupling strength by ring distance (self-coupling first).

for dist in (0, 1, 2, 4, 8, 16, 32):
    print(f"distance {dist:2d}: |k| = {magnitude[0, dist]:.4f}  lag = {phase[0, dist]:+.3f} rad")

# the other variants for comparison
for variant in ("inv", "fout"):
    mag, _ = coupling_fields(reconstruct_coupling(s4d_spectrum(variant, N).eigenvalues))
    print(variant, np.round(mag[0, :6], 3))
