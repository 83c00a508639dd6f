import time

import pytest

from wavessm.data import SyntheticSpec, generate_synthetic, train_test
from wavessm.model import ModelConfig, TrainConfig, init_model, train

ACCEPTANCE_LINES = []

# stop once a full epoch of running training accuracy reaches this
TARGET_ACCURACY = 0.99


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synthetic_split():
    spec = SyntheticSpec()
    ds = generate_synthetic(spec)
    return train_test(ds, spec.train_fraction, spec.seed)


def _fit(train_set, test_set, n_classes):
    model = init_model(ModelConfig(n_classes=n_classes))
    start = time.perf_counter()
    model, hist = train(model, train_set, TrainConfig(epochs=50, target_accuracy=TARGET_ACCURACY),
                        test=test_set)
    return model, hist, time.perf_counter() - start


@pytest.fixture(scope="session")
def three_class_run(synthetic_split):
    tr, te = synthetic_split
    model, hist, seconds = _fit(tr, te, 3)
    return dict(model=model, history=hist, seconds=seconds, train=tr, test=te)


@pytest.fixture(scope="session")
def binary_run(synthetic_split):
    tr, te = (d.select_classes([1, 2]) for d in synthetic_split)
    model, hist, seconds = _fit(tr, te, 2)
    return dict(model=model, history=hist, seconds=seconds, train=tr, test=te)
