"""JSON/CSV serialisation: spectra, checkpoints, matrices and manifests."""

import csv
import json

import numpy as np

from .errors import SchemaError
from .model import ModelConfig, S4DClassifier
from .ssm import DiagonalSpectrum, Discretization

CHECKPOINT_FORMAT = 1


def encode_array(a):
    """Nested lists; complex entries become ``{"re": .., "im": ..}``."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.frompyfunc(lambda z: {"re": float(z.real), "im": float(z.imag)}, 1, 1)(
            a).tolist()
    return a.astype(float).tolist()


def _decode(obj):
    if isinstance(obj, dict):
        return complex(obj["re"], obj["im"])
    if isinstance(obj, list):
        return [_decode(o) for o in obj]
    return obj


def decode_array(obj):
    out = np.array(_decode(obj))
    if out.dtype == object:
        out = out.astype(complex)
    return out


def spectrum_to_json(disc):
    """``{variant, N, tau, eigenvalues, B}`` for a Discretization (or bare spectrum)."""
    spectrum = disc.spectrum if isinstance(disc, Discretization) else disc
    d = {
        "variant": spectrum.variant,
        "N": spectrum.N,
        "index_origin": spectrum.index_origin,
        "eigenvalues": encode_array(spectrum.eigenvalues),
    }
    if isinstance(disc, Discretization):
        d["tau"] = disc.tau
        d["B"] = encode_array(disc.B)
    return d


def spectrum_from_json(d):
    spectrum = DiagonalSpectrum(decode_array(d["eigenvalues"]).astype(complex), d["variant"],
                                d.get("index_origin", 1))
    if spectrum.N != d["N"]:
        raise SchemaError("eigenvalue count does not match N")
    if "B" in d:
        return Discretization(spectrum, decode_array(d["B"]).astype(complex), d["tau"])
    return spectrum


def save_checkpoint(model, path, extra=None):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "spectrum": spectrum_to_json(model.spectrum),
        "tensors": {k: encode_array(v) for k, v in model.params().items()},
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(f"unsupported checkpoint format {doc.get('format')!r}")
    config = ModelConfig.from_dict(doc["config"])
    t = doc["tensors"]
    return S4DClassifier(
        config,
        spectrum_from_json(doc["spectrum"]),
        decode_array(t["B"]).astype(complex),
        decode_array(t["encoder"]).astype(float),
        decode_array(t["C"]).astype(complex),
        decode_array(t["W"]).astype(float),
    )


def fmt(v):
    # repr round-trips floats exactly and is stable across runs
    return repr(float(v))


def write_matrix_csv(path, M, row_label=None):
    """Row-major CSV with a header of 1-based column indices."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = [str(j + 1) for j in range(M.shape[1])]
        w.writerow(([row_label] if row_label else []) + head)
        for i, row in enumerate(M):
            w.writerow(([str(i + 1)] if row_label else []) + [fmt(v) for v in row])


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")
