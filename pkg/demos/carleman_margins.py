"""
How much of the decision is linear?
===================================

Replace GELU by its degree-R polynomial fit and the readout becomes a finite
sum of products of wave amplitudes. The explained fraction compares output
margins of the truncated and full models on correctly classified trials.
"""

import numpy as np

from wavessm import carleman as cm
from wavessm.data import SyntheticSpec, generate_synthetic, train_test
from wavessm.model import ModelConfig, TrainConfig, init_model, margin_explained, modal_states, \
    train

spec = SyntheticSpec(frequencies=(15.0, 20.0), trials_per_class=150)
train_set, test_set = train_test(generate_synthetic(spec), 0.8, seed=0)
model = init_model(ModelConfig(n_classes=2))
train(model, train_set, TrainConfig(epochs=50, target_accuracy=0.99))

for R in (1, 2, 4, 8):
    data = margin_explained(model, test_set, R)
    fixed = margin_explained(model, test_set, R, fit="fixed")
    print(f"R={R}: explained {data.fraction:.3f} (fit to features), "
          f"{fixed.fraction:.3f} (fixed [-4, 4] fit)")
print("exact GELU:", margin_explained(model, test_set).fraction)

############################################################
# The same order-2 readout through the binomial expansion of wave products
# instead of the elementwise polynomial.

mu, _ = modal_states(model, test_set.series[:8])
coeffs = margin_explained(model, test_set, 2).coeffs
a = cm.output_operator(mu, model.alpha, model.W, coeffs)
b = cm.truncated_output(mu, model.alpha, model.W, coeffs)
print("route mismatch:", np.max(np.abs(a - b)))
