import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavessm.data import Dataset
from wavessm.errors import DegenerateMarginError, UnsupportedTaskError
from wavessm.model import (
    AdamW,
    ModelConfig,
    TrainConfig,
    evaluate,
    forward,
    init_model,
    loss_and_grads,
    margin_explained,
    train,
)


def tiny(trainable=("C", "W", "B", "encoder"), n_classes=2, seed=0, channels=2):
    cfg = ModelConfig(N=4, d_model=3, tau=0.1, n_classes=n_classes, channels=channels,
                      trainable=trainable, seed=seed)
    return init_model(cfg)


def scalar_forward(model, series):
    """Step-by-step recomputation with Python scalars."""
    cfg = model.config
    N, d, T = cfg.N, cfg.d_model, series.shape[1]
    lam = [cmath.exp(complex(e) * cfg.tau) for e in model.spectrum.eigenvalues]
    factor = [(cmath.exp(complex(e) * cfg.tau) - 1) / complex(e) for e in model.spectrum.eigenvalues]
    F = [[cmath.exp(-2j * math.pi * j * s / N) / math.sqrt(N) for s in range(N)] for j in range(N)]
    mu = [0j] * N
    pooled = [0.0] * d
    for k in range(T):
        u = [sum(model.encoder[l, c] * series[c, k] for c in range(series.shape[0]))
             for l in range(d)]
        mu = [lam[i] * mu[i] + factor[i] * sum(model.B[i, l] * u[l] for l in range(d))
              for i in range(N)]
        x = [sum(F[n][i] * mu[i] for i in range(N)) for n in range(N)]
        for l in range(d):
            y = sum(model.C[l, n] * x[n] for n in range(N)).real
            pooled[l] += 0.5 * y * (1 + math.erf(y / math.sqrt(2))) / T
    return np.array([sum(model.W[c, l] * pooled[l] for l in range(d))
                     for c in range(model.W.shape[0])])


def test_forward_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    model = tiny()
    series = rng.standard_normal((3, 2, 5))
    logits, _ = forward(model, series)
    for b in range(3):
        assert np.max(np.abs(logits[b] - scalar_forward(model, series[b]))) < 1e-12


def test_forward_trivial_cases():
    model = tiny()
    logits, _ = forward(model, np.zeros((2, 2, 6)))
    assert np.array_equal(logits, np.zeros((2, 2)))
    model.W[1] = model.W[0]
    logits, _ = forward(model, np.random.default_rng(1).standard_normal((4, 2, 6)))
    assert np.allclose(logits[:, 1] - logits[:, 0], 0, atol=0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_identity_forward_linear_in_series(seed, a, b):
    rng = np.random.default_rng(seed)
    model = tiny(seed=seed % 1000)
    s, t = rng.standard_normal((2, 1, 2, 7))
    f = lambda v: forward(model, v, activation="identity")[0]
    assert np.max(np.abs(f(a * s + b * t) - (a * f(s) + b * f(t)))) < 1e-12


def _fd_grad(model, name, series, labels, h=1e-5):
    p = getattr(model, name)
    flat = p.reshape(-1)
    out = np.zeros(flat.shape, dtype=p.dtype)
    parts = (1.0, 1j) if np.iscomplexobj(p) else (1.0,)
    for idx in range(flat.size):
        for unit in parts:
            orig = flat[idx]
            flat[idx] = orig + h * unit
            lp, _ = loss_and_grads(model, series, labels, trainable=())
            flat[idx] = orig - h * unit
            lm, _ = loss_and_grads(model, series, labels, trainable=())
            flat[idx] = orig
            out[idx] += unit * (lp - lm) / (2 * h)
    return out.reshape(p.shape)


@pytest.mark.parametrize("name", ["C", "W", "B", "encoder"])
def test_gradient_gate(name):
    rng = np.random.default_rng(3)
    model = tiny()
    series = rng.standard_normal((4, 2, 5))
    labels = np.array([1, 2, 2, 1])
    _, grads = loss_and_grads(model, series, labels)
    fd = _fd_grad(model, name, series, labels)
    rel = np.linalg.norm(grads[name] - fd) / np.linalg.norm(fd)
    assert rel < 1e-4
    assert np.max(np.abs(grads[name] - fd)) < 1e-4 * np.max(np.abs(fd))


def test_saturated_and_duplicate_batches():
    model = tiny()
    series = np.random.default_rng(4).standard_normal((1, 2, 5))
    logits, _ = forward(model, series)
    label = int(np.argmax(logits[0])) + 1
    model.W *= 1e4 / abs(logits[0, 0] - logits[0, 1])
    loss, grads = loss_and_grads(model, series, [label])
    assert loss < 1e-12
    assert all(np.max(np.abs(g)) < 1e-8 for g in grads.values())
    model = tiny()
    _, single = loss_and_grads(model, series, [1])
    _, double = loss_and_grads(model, np.concatenate([series, series]), [1, 1])
    for k in single:
        assert np.allclose(single[k], double[k], rtol=1e-12, atol=1e-15)


def test_adamw_zero_lr_and_pure_decay():
    rng = np.random.default_rng(5)
    p = {"a": rng.standard_normal(4), "z": rng.standard_normal(3) + 1j * rng.standard_normal(3)}
    before = {k: v.copy() for k, v in p.items()}
    opt = AdamW(p, lr=0.0)
    opt.step({k: rng.standard_normal(v.shape) + 0 * v for k, v in p.items()})
    assert all(np.array_equal(p[k], before[k]) for k in p)
    opt = AdamW(p, lr=0.1, weight_decay=0.5)
    for _ in range(3):
        opt.step({k: np.zeros_like(v) for k, v in p.items()})
    for k in p:
        assert np.allclose(p[k], before[k] * 0.95**3, rtol=1e-15)


def test_adamw_first_step_is_sign_of_gradient():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    AdamW(p, lr=0.01, weight_decay=0.0).step({"w": np.array([5.0, -0.1, 0.0])})
    assert np.allclose(p["w"], [0.99, -1.99, 3.0])


def _toy_dataset(n=24, T=30, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat([1, 2], n // 2)
    t = np.arange(T)
    series = np.where(labels[:, None] == 1, np.sin(0.3 * t), np.sin(1.1 * t))[:, None, :]
    return Dataset(series + 0.1 * rng.standard_normal(series.shape), labels)


def test_training_is_deterministic_and_freezes_spectrum():
    ds = _toy_dataset()
    cfg = ModelConfig(N=8, d_model=4, n_classes=2, tau=0.1, seed=2)
    runs = []
    for _ in range(2):
        model = init_model(cfg)
        eig, B, enc = model.spectrum.eigenvalues.copy(), model.B.copy(), model.encoder.copy()
        C0 = model.C.copy()
        model, hist = train(model, ds, TrainConfig(epochs=3, batch_size=8, lr=1e-2))
        assert np.array_equal(model.spectrum.eigenvalues, eig)
        assert np.array_equal(model.B, B) and np.array_equal(model.encoder, enc)
        assert not np.array_equal(model.C, C0)
        runs.append((hist.loss, hist.accuracy, model.C.copy()))
    assert runs[0][0] == runs[1][0] and runs[0][1] == runs[1][1]
    assert np.array_equal(runs[0][2], runs[1][2])


def test_training_can_update_encoder_and_input_matrix():
    ds = _toy_dataset()
    cfg = ModelConfig(N=8, d_model=4, n_classes=2, tau=0.1,
                      trainable=("C", "W", "B", "encoder"))
    model = init_model(cfg)
    B, enc = model.B.copy(), model.encoder.copy()
    train(model, ds, TrainConfig(epochs=1, batch_size=8))
    assert not np.array_equal(model.B, B) and not np.array_equal(model.encoder, enc)


def test_training_learns_toy_task():
    ds = _toy_dataset(n=40)
    model = init_model(ModelConfig(N=8, d_model=8, n_classes=2, tau=0.1, seed=1))
    model, hist = train(model, ds, TrainConfig(epochs=60, batch_size=8, lr=2e-2))
    assert hist.loss[-1] < hist.loss[0]
    assert evaluate(model, ds)["accuracy"] == 1.0


def test_divergence_aborts_with_history():
    model = tiny(channels=1)
    model.W[:] = np.nan
    model, hist = train(model, _toy_dataset(), TrainConfig(epochs=2))
    assert hist.aborted and hist.loss == []


def test_evaluate_fixtures():
    ds = Dataset(np.zeros((6, 1, 3)), [1, 2, 3, 1, 2, 3])
    model = init_model(ModelConfig(N=4, d_model=3, n_classes=3))
    perfect = np.eye(3)[ds.labels - 1] * 5
    m = evaluate(model, ds, logits=perfect)
    assert m["accuracy"] == 1.0 and m["mean_margin"] == 5.0
    assert m["confusion"] == [[2, 0, 0], [0, 2, 0], [0, 0, 2]]
    m = evaluate(model, ds, logits=np.zeros((6, 3)))
    assert m["accuracy"] == pytest.approx(1 / 3)
    assert m["per_class_accuracy"] == {1: 1.0, 2: 0.0, 3: 0.0}


def test_margin_explained_guards_and_self_comparison():
    ds = _toy_dataset()
    model = init_model(ModelConfig(N=8, d_model=4, n_classes=2, tau=0.1))
    train(model, ds, TrainConfig(epochs=20, batch_size=8, lr=2e-2))
    res = margin_explained(model, ds)
    assert res.fraction == 1.0 and res.report.fraction_mean_of_ratios == 1.0
    zero = model.copy()
    zero.W[:] = 0
    with pytest.raises(DegenerateMarginError):
        margin_explained(zero, ds, correct_only=False)
    three = init_model(ModelConfig(N=8, d_model=4, n_classes=3, tau=0.1))
    with pytest.raises(UnsupportedTaskError):
        margin_explained(three, ds)


def test_margin_paths_agree_on_data_fit():
    # the data fit spans every observed feature, so clipping never engages
    ds = _toy_dataset()
    model = init_model(ModelConfig(N=8, d_model=4, n_classes=2, tau=0.1, seed=3))
    train(model, ds, TrainConfig(epochs=20, batch_size=8, lr=2e-2))
    for R in (1, 2, 4):
        a = margin_explained(model, ds, R, path="activation", correct_only=False)
        m = margin_explained(model, ds, R, path="modal", correct_only=False)
        assert np.max(np.abs(a.report.approx - m.report.approx)) < 1e-9
