"""Synthetic sinusoid-in-noise data and the multivariate CSV format.

CSV layout: header ``sample_id,label,channel_id,t0,t1,...`` then one row per
(sample, channel). Labels are 1-based class ids.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, SchemaError


@dataclass
class Dataset:
    series: np.ndarray  # (n, channels, T)
    labels: np.ndarray  # (n,), 1-based
    sample_ids: list = None

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.series.ndim != 3:
            raise SchemaError(f"series must be (n, channels, T), got {self.series.shape}")
        if len(self.labels) != len(self.series):
            raise SchemaError("one label per sample required")
        if self.sample_ids is None:
            self.sample_ids = [str(i) for i in range(len(self.labels))]

    def __len__(self):
        return len(self.labels)

    @property
    def channels(self):
        return self.series.shape[1]

    @property
    def length(self):
        return self.series.shape[2]

    @property
    def n_classes(self):
        return int(self.labels.max()) if len(self) else 0

    def subset(self, idx):
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Dataset(self.series[idx], self.labels[idx], [self.sample_ids[i] for i in idx])

    def select_classes(self, classes):
        """Keep the given classes and relabel them 1..len(classes) in that order."""
        classes = list(classes)
        keep = np.isin(self.labels, classes)
        out = self.subset(keep)
        out.labels = np.array([classes.index(c) + 1 for c in out.labels], dtype=int)
        return out


@dataclass(frozen=True)
class SyntheticSpec:
    frequencies: tuple = (15.0, 20.0, None)  # None marks the noise-only class
    length: int = 900
    trials_per_class: int = 300
    snr_db: tuple = (-1.0, -0.5)
    amplitude: tuple = (0.5, 2.0)
    tau: float = 0.01  # seconds per step
    seed: int = 0
    train_fraction: float = 0.8

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("frequencies", "snr_db", "amplitude"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def snr_db(signal, noise):
    return 10 * np.log10(np.mean(signal**2) / np.mean(noise**2))


def _trial(rng, spec, freq, t):
    a = rng.uniform(*spec.amplitude)
    phase = rng.uniform(0, 2 * np.pi)
    target = rng.uniform(*spec.snr_db)
    clean = a * np.sin(2 * np.pi * (freq or 0.0) * t + phase)
    noise = rng.standard_normal(t.size)
    # the noise-only class keeps the noise power its signal would have implied
    signal_power = a * a / 2 if freq is None else np.mean(clean**2)
    noise *= np.sqrt(signal_power / (np.mean(noise**2) * 10 ** (target / 10)))
    if freq is None:
        return noise, clean * 0.0, noise
    return clean + noise, clean, noise


def generate_synthetic(spec=SyntheticSpec(), return_components=False):
    """Three-class (by default) sinusoid/noise dataset, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length) * spec.tau
    series, labels, clean, noise = [], [], [], []
    for label, freq in enumerate(spec.frequencies, start=1):
        for _ in range(spec.trials_per_class):
            x, s, n = _trial(rng, spec, freq, t)
            series.append(x)
            clean.append(s)
            noise.append(n)
            labels.append(label)
    ds = Dataset(np.array(series)[:, None, :], np.array(labels))
    if return_components:
        return ds, np.array(clean), np.array(noise)
    return ds


def stratified_split(labels, train_fraction=0.8, seed=0):
    """Boolean train mask, ``train_fraction`` of each class, seed-controlled."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    mask = np.zeros(labels.size, dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        mask[idx[: int(round(train_fraction * idx.size))]] = True
    return mask


def train_test(dataset, train_fraction=0.8, seed=0):
    mask = stratified_split(dataset.labels, train_fraction, seed)
    return dataset.subset(mask), dataset.subset(~mask)


# --- CSV -----------------------------------------------------------------------


def write_csv(dataset, path):
    n, ch, T = dataset.series.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "label", "channel_id"] + [f"t{k}" for k in range(T)])
        for i in range(n):
            for c in range(ch):
                w.writerow([dataset.sample_ids[i], int(dataset.labels[i]), c]
                           + [repr(float(v)) for v in dataset.series[i, c]])


def ingest_csv(path, channels=None, length="strict"):
    """Read the dataset CSV.

    ``length`` is ``"strict"`` (all series equal), ``"truncate"`` (cut to the
    shortest) or ``"pad"`` (zero-pad to the longest). ``channels`` optionally
    pins the expected channel count.
    """
    if length not in ("strict", "truncate", "pad"):
        raise ValueError(f"unknown length policy {length!r}")
    samples = {}
    order = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return Dataset(np.zeros((0, channels or 1, 0)), np.zeros(0, dtype=int), [])
        if [h.strip() for h in header[:3]] != ["sample_id", "label", "channel_id"]:
            raise ParseError("header must start with sample_id,label,channel_id", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 4:
                raise ParseError("row has no values", lineno)
            sid = row[0]
            try:
                label = int(row[1])
                ch = int(row[2])
                values = [float(v) for v in row[3:] if v.strip() != ""]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if sid not in samples:
                samples[sid] = (label, {})
                order.append(sid)
            elif samples[sid][0] != label:
                raise ParseError(f"sample {sid} has conflicting labels", lineno)
            if ch in samples[sid][1]:
                raise ParseError(f"duplicate channel {ch} for sample {sid}", lineno)
            samples[sid][1][ch] = np.array(values)
    if not order:
        return Dataset(np.zeros((0, channels or 1, 0)), np.zeros(0, dtype=int), [])
    counts = {len(samples[s][1]) for s in order}
    if len(counts) != 1 or (channels is not None and counts != {channels}):
        raise SchemaError(f"inconsistent channel counts {sorted(counts)}")
    n_ch = counts.pop()
    for s in order:
        if sorted(samples[s][1]) != list(range(n_ch)):
            raise SchemaError(f"sample {s} channels must be 0..{n_ch - 1}")
    lengths = [v.size for s in order for v in samples[s][1].values()]
    if length == "strict" and len(set(lengths)) != 1:
        raise SchemaError("series lengths differ; use truncate or pad")
    T = min(lengths) if length == "truncate" else max(lengths)
    series = np.zeros((len(order), n_ch, T))
    for i, s in enumerate(order):
        for c, v in samples[s][1].items():
            v = v[:T]
            series[i, c, : v.size] = v
    labels = np.array([samples[s][0] for s in order])
    if labels.min() < 1:
        raise SchemaError("labels must be 1-based class ids")
    return Dataset(series, labels, order)
