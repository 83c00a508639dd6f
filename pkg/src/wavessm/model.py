"""Single-layer S4D classifier: encoder -> diagonal SSM -> mixing -> GELU -> pool -> W.

Gradients are hand-written reverse mode. Complex parameters use the real
parameterisation: the gradient of a complex tensor ``P`` is stored as
``dL/dRe(P) + 1j * dL/dIm(P)``.
"""

import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from . import carleman as cm
from .errors import DimensionError, DivergenceError, UnsupportedTaskError
from .spectral import dft_basis
from .ssm import DiagonalSpectrum, discretize_zoh, init_input_matrix, s4d_spectrum

log = logging.getLogger(__name__)

PARAM_NAMES = ("C", "W", "B", "encoder")


@dataclass
class ModelConfig:
    N: int = 64
    d_model: int = 64
    tau: float = 0.01
    variant: str = "lin"
    n_classes: int = 3
    channels: int = 1
    trainable: tuple = ("C", "W")
    index_origin: int = 1
    activation: str = "gelu"
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        self.trainable = tuple(self.trainable)
        bad = set(self.trainable) - set(PARAM_NAMES)
        if bad:
            raise ValueError(f"unknown trainable tensors {sorted(bad)}")

    def to_dict(self):
        d = asdict(self)
        d["trainable"] = list(self.trainable)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class S4DClassifier:
    config: ModelConfig
    spectrum: DiagonalSpectrum
    B: np.ndarray  # (N, d_model) complex
    encoder: np.ndarray  # (d_model, channels) real
    C: np.ndarray  # (d_model, N) complex, acts on oscillator-frame states
    W: np.ndarray  # (n_classes, d_model) real

    @cached_property
    def basis(self):
        return dft_basis(self.config.N)

    @property
    def disc(self):
        # rebuilt on access since B may be trained
        return discretize_zoh(self.spectrum, self.B, self.config.tau)

    @property
    def alpha(self):
        return self.C @ self.basis

    def params(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return S4DClassifier(self.config, self.spectrum, *(p.copy() for p in
                             (self.B, self.encoder, self.C, self.W)))


def init_model(config):
    rng = np.random.default_rng(config.seed)
    if config.variant == "custom":
        raise ValueError("custom spectra must be passed to S4DClassifier directly")
    spectrum = s4d_spectrum(config.variant, config.N, config.index_origin)
    N, d, nc = config.N, config.d_model, config.n_classes
    B = init_input_matrix(N, d, rng)
    encoder = rng.standard_normal((d, config.channels))
    C = np.sqrt(0.5 / N) * (rng.standard_normal((d, N)) + 1j * rng.standard_normal((d, N)))
    W = rng.standard_normal((nc, d)) / np.sqrt(d)
    return S4DClassifier(config, spectrum, B, encoder, C, W)


def _batch(series):
    series = np.asarray(series, dtype=float)
    if series.ndim == 2:
        series = series[None]
    return series


def modal_states(model, series):
    """Diagonal-frame states ``mu`` of shape ``(batch, T, N)`` from zero state."""
    series = _batch(series)
    if series.shape[1] != model.encoder.shape[1]:
        raise DimensionError(f"series has {series.shape[1]} channels, encoder expects "
                             f"{model.encoder.shape[1]}")
    disc = model.disc
    u = np.einsum("dc,bct->btd", model.encoder, series)
    drive = u @ disc.B_bar.T
    lam = disc.discrete_eigenvalues
    mu = np.empty(drive.shape, dtype=complex)
    x = np.zeros((drive.shape[0], drive.shape[2]), dtype=complex)
    for k in range(drive.shape[1]):
        x = lam * x + drive[:, k]
        mu[:, k] = x
    return mu, u


def _mix(mu, alpha):
    return (mu @ np.ascontiguousarray(alpha.T)).real


def forward(model, series, activation=None):
    """Logits ``(batch, n_classes)`` and a cache for :func:`backward`."""
    act = activation or model.config.activation
    mu, u = modal_states(model, series)
    y = _mix(mu, model.alpha)
    h = cm._activation_fn(act)(y)
    pooled = h.mean(axis=1)
    logits = pooled @ model.W.T
    cache = dict(series=_batch(series), u=u, mu=mu, y=y, pooled=pooled, activation=act)
    return logits, cache


def predict(model, series, batch_size=64):
    series = _batch(series)
    return np.concatenate([forward(model, series[i:i + batch_size])[0]
                           for i in range(0, len(series), batch_size)]) if len(series) else \
        np.zeros((0, model.config.n_classes))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy; ``labels`` are 0-based here."""
    z = logits - logits.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    return float(-logp[np.arange(len(labels)), labels].mean())


def backward(model, cache, g_logits, wanted=PARAM_NAMES):
    grads = {}
    mu, y, pooled = cache["mu"], cache["y"], cache["pooled"]
    T = mu.shape[1]
    if "W" in wanted:
        grads["W"] = g_logits.T @ pooled
    g_pooled = g_logits @ model.W
    if cache["activation"] == "identity":
        g_y = np.broadcast_to(g_pooled[:, None, :] / T, y.shape)
    else:
        g_y = g_pooled[:, None, :] / T * cm.gelu_grad(y)
    # y = Re(alpha mu): G_alpha = sum g_y conj(mu)^T, and alpha = C F
    if "C" in wanted:
        # operands made contiguous so the products stay on BLAS
        g2 = np.ascontiguousarray(g_y.reshape(-1, g_y.shape[-1]).T)
        flat = mu.reshape(-1, mu.shape[-1])
        g_alpha = g2 @ np.ascontiguousarray(flat.real) - 1j * (g2 @ np.ascontiguousarray(flat.imag))
        grads["C"] = g_alpha @ model.basis.conj().T
    if "B" in wanted or "encoder" in wanted:
        g_mu = g_y @ model.alpha.conj()
        lam_c = model.disc.discrete_eigenvalues.conj()
        adj = np.empty_like(g_mu)
        a = np.zeros((g_mu.shape[0], g_mu.shape[2]), dtype=complex)
        for k in range(T - 1, -1, -1):
            a = g_mu[:, k] + lam_c * a
            adj[:, k] = a
        disc = model.disc
        if "B" in wanted:
            g_bbar = np.einsum("btn,btd->nd", adj, cache["u"])
            grads["B"] = disc.input_factor.conj()[:, None] * g_bbar
        if "encoder" in wanted:
            g_u = (adj @ disc.B_bar.conj()).real
            grads["encoder"] = np.einsum("btd,bct->dc", g_u, cache["series"])
    return grads


def loss_and_grads(model, series, labels, trainable=None):
    """Mean cross-entropy over the batch and gradients of the trainable tensors.

    ``labels`` are the dataset's 1-based class ids.
    """
    loss, grads, _ = _loss_grads_logits(model, series, labels, trainable)
    return loss, grads


def _loss_grads_logits(model, series, labels, trainable=None):
    labels = np.asarray(labels, dtype=int) - 1
    if labels.size == 0:
        raise ValueError("empty batch")
    logits, cache = forward(model, series)
    loss = cross_entropy(logits, labels)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite loss")
    g_logits = softmax(logits)
    g_logits[np.arange(labels.size), labels] -= 1
    g_logits /= labels.size
    wanted = model.config.trainable if trainable is None else trainable
    return loss, backward(model, cache, g_logits, wanted), logits


class AdamW:
    """Adam with decoupled weight decay over a dict of numpy arrays (updated in place).

    Complex arrays are optimised as independent real and imaginary parts.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = params
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(self._real(p)) for k, p in params.items()}
        self.v = {k: np.zeros_like(self._real(p)) for k, p in params.items()}

    @staticmethod
    def _real(a):
        return a.view(np.float64) if np.iscomplexobj(a) else a

    def step(self, grads):
        self.t += 1
        b1, b2 = self.betas
        for k, p in self.params.items():
            pr = self._real(p)
            g = self._real(np.ascontiguousarray(grads.get(k, np.zeros_like(p))))
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            step = self.lr * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
            pr -= step * self.m[k] / (np.sqrt(self.v[k]) + self.eps)
            pr -= self.lr * self.weight_decay * pr


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    batch_size: int = 32
    seed: int = 0
    target_accuracy: float = None  # stop early once train accuracy reaches this


@dataclass
class History:
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)
    aborted: bool = False


def train(model, dataset, config=TrainConfig(), test=None):
    """Train the flagged tensors in place; eigenvalues are never touched."""
    if len(dataset) == 0:
        raise ValueError("empty training split")
    if dataset.n_classes > model.config.n_classes:
        raise UnsupportedTaskError("dataset has more classes than the model")
    rng = np.random.default_rng(config.seed)
    params = {k: getattr(model, k) for k in model.config.trainable}
    opt = AdamW(params, config.lr, config.betas, config.eps, config.weight_decay)
    hist = History()
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            try:
                loss, grads, logits = _loss_grads_logits(model, dataset.series[idx],
                                                         dataset.labels[idx])
            except DivergenceError:
                hist.aborted = True
                log.error("training diverged at epoch %d", epoch)
                return model, hist
            opt.step(grads)
            total += loss * idx.size
            correct += int(np.sum(np.argmax(logits, axis=1) == dataset.labels[idx] - 1))
        # running accuracy over the epoch's batches, measured before each update
        acc = correct / n
        hist.loss.append(total / n)
        hist.accuracy.append(acc)
        if test is not None and len(test):
            hist.test_accuracy.append(evaluate(model, test)["accuracy"])
        log.info("epoch %d loss %.4f acc %.3f test %s", epoch + 1, hist.loss[-1], acc,
                 hist.test_accuracy[-1] if hist.test_accuracy else "-")
        if config.target_accuracy is not None and acc >= config.target_accuracy:
            break
    return model, hist


def evaluate(model, dataset, logits=None):
    """Accuracy, per-class accuracy, mean decided margin, confusion counts."""
    if logits is None:
        logits = predict(model, dataset.series)
    nc = model.config.n_classes
    truth = dataset.labels - 1
    pred = np.argmax(logits, axis=1)
    confusion = np.zeros((nc, nc), dtype=int)
    np.add.at(confusion, (truth, pred), 1)
    per_class = {int(c + 1): float(np.mean(pred[truth == c] == c))
                 for c in range(nc) if np.any(truth == c)}
    top2 = np.sort(logits, axis=1)[:, -2:] if nc >= 2 else np.zeros((len(pred), 2))
    return {
        "accuracy": float(np.mean(pred == truth)) if len(pred) else float("nan"),
        "per_class_accuracy": per_class,
        "mean_margin": float(np.mean(top2[:, 1] - top2[:, 0])) if len(pred) else float("nan"),
        "confusion": confusion.tolist(),
        "correct": pred == truth,
        "logits": logits,
    }


def correct_subset(model, dataset):
    return dataset.subset(evaluate(model, dataset)["correct"])


def features(model, dataset):
    """Pre-activation features ``y`` of shape ``(n, T, d_model)``."""
    mu, _ = modal_states(model, dataset.series)
    return _mix(mu, model.alpha)


def fit_to_features(model, dataset, degree):
    """GELU fit rescaled to the observed feature range and weighted by its samples."""
    y = features(model, dataset)
    s = float(np.max(np.abs(y))) if y.size else 1.0
    return cm.chebyshev_fit_gelu(degree, (-s, s), samples=y)


@dataclass
class MarginAnalysis:
    R: int
    coeffs: cm.CarlemanCoefficients
    report: cm.MarginReport

    @property
    def fraction(self):
        return self.report.fraction


def margin_explained(model, dataset, R=None, coeffs=None, fit="data",
                     domain=cm.DEFAULT_DOMAIN, path="activation", correct_only=True):
    """Share of the full-GELU output margin reproduced by an order-``R`` readout.

    ``R=None`` compares the exact GELU model with itself. Without explicit
    ``coeffs`` GELU is refitted at degree ``R``: ``fit="data"`` rescales to the
    analysed features and weights the least squares by their empirical
    distribution, ``fit="fixed"`` uses Chebyshev nodes on ``domain``. ``path``
    picks the clipped elementwise activation or the modal binomial expansion.
    """
    if model.config.n_classes != 2:
        raise UnsupportedTaskError("margin analysis is defined for two classes")
    if correct_only:
        dataset = correct_subset(model, dataset)
    mu, _ = modal_states(model, dataset.series)
    full = cm.output_operator(mu, model.alpha, model.W, "gelu")
    # alpha = C F, so (mu, alpha) gives the same features as (F mu, C)
    if R is None:
        return MarginAnalysis(None, None, cm.margin_fraction(full, full))
    if coeffs is None:
        if fit == "data":
            coeffs = fit_to_features(model, dataset, R)
        else:
            coeffs = cm.chebyshev_fit_gelu(R, domain)
    elif R < coeffs.degree:
        coeffs = coeffs.truncate(R)
    if path == "modal":
        approx = cm.truncated_output(mu, model.alpha, model.W, coeffs, R)
    else:
        approx = cm.output_operator(mu, model.alpha, model.W, coeffs)
    return MarginAnalysis(R, coeffs, cm.margin_fraction(full, approx))
