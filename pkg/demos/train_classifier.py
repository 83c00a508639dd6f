"""
Training the single-layer classifier
====================================

Only the mixing matrix ``C`` and readout ``W`` are trained; the spectrum, the
input matrix and the encoder stay where initialisation put them. A smaller
dataset than the default keeps this demo to a few seconds per epoch.
"""

import logging

from wavessm.data import SyntheticSpec, generate_synthetic, train_test
from wavessm.model import ModelConfig, TrainConfig, evaluate, init_model, train

logging.basicConfig(level=logging.INFO, format="%(message)s")

spec = SyntheticSpec(trials_per_class=100)
train_set, test_set = train_test(generate_synthetic(spec), 0.8, seed=0)

model = init_model(ModelConfig())
model, history = train(model, train_set, TrainConfig(epochs=50, target_accuracy=0.99),
                       test=test_set)

metrics = evaluate(model, test_set)
print("test accuracy:", metrics["accuracy"])
print("per class:", metrics["per_class_accuracy"])
for row in metrics["confusion"]:
    print(row)
