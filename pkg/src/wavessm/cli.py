"""Command-line entry point: ``wavessm <subcommand> [options]``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import carleman as cm
from . import io
from .data import SyntheticSpec, generate_synthetic, ingest_csv, train_test, write_csv
from .errors import WaveSSMError
from .modal import (
    class_separation_ranking,
    class_separation_scores,
    modal_energy,
    render_field,
    series_from_modal_states,
    wave_interaction,
)
from .model import (
    ModelConfig,
    TrainConfig,
    correct_subset,
    evaluate,
    init_model,
    margin_explained,
    modal_states,
    train,
)
from .oscillator import DynamicsOperator, coupling_matrix, from_phase, phase_raster, \
    ring_network, traveling_wave_score
from .spectral import circulant_residual, coupling_fields, reconstruct_coupling
from .ssm import s4d_spectrum

log = logging.getLogger("wavessm")


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    threads: int = None
    out: str = None
    params: dict = field(default_factory=dict)

    def to_manifest(self):
        return {"tool": "wavessm", "version": __version__, **asdict(self)}

    @classmethod
    def from_manifest(cls, doc):
        doc = dict(doc)
        doc.pop("tool", None)
        doc.pop("version", None)
        return cls(**doc)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    p.add_argument("--json", action="store_true", help="print a machine-readable summary")
    p.add_argument("--gnuplot", action="store_true", help="also write plot script stubs")
    p.add_argument("--log-level", default="WARNING")
    return p


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="wavessm", parents=[common],
                                     description="Diagonal SSMs as oscillator networks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topology", parents=[common], help="coupling matrix of an S4D spectrum")
    p.add_argument("--variant", choices=["lin", "inv", "fout"], default="lin")
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--index-origin", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", parents=[common], help="phase raster of a ring network")
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--neighbours", type=int, default=3)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--lag", type=float, default=np.pi / 2 - 0.05)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=0.1, help="sampling step of the raster")
    p.add_argument("--wavenumber", type=int, default=3,
                   help="twist of the initial phase profile; 0 for uniform random phases")
    p.add_argument("--noise", type=float, default=0.05, help="phase jitter on the twisted start")
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="synthetic sinusoid dataset")
    p.add_argument("--spec", help="JSON with SyntheticSpec fields")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[common], help="train C and W (by default)")
    p.add_argument("--config", help="JSON with ModelConfig fields and an optional 'train' block")
    p.add_argument("--data", required=True)
    p.add_argument("--classes", type=_int_list, help="restrict to these labels, e.g. 1,2")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")

    p = sub.add_parser("eval", parents=[common], help="metrics on a split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out")

    p = sub.add_parser("analyze-modes", parents=[common], help="modal energy reports")
    p.add_argument("--ckpt")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--pairs", default="", help="mode pairs (1-based) like 30:40,4:8")
    p.add_argument("--trial", type=int, default=0, help="trial whose field is rendered")
    p.add_argument("--out", required=True)

    p = sub.add_parser("carleman-report", parents=[common], help="truncation margin report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--orders", type=_int_list, default=[1, 2])
    p.add_argument("--fit", choices=["data", "fixed"], default="data")
    p.add_argument("--degree", type=int, default=8, help="degree of the reported GELU fit")
    p.add_argument("--domain", type=float, nargs=2, default=list(cm.DEFAULT_DOMAIN))
    p.add_argument("--out", required=True)
    return parser


def _manifest(args, out_dir, params):
    rc = RunConfig(args.command, args.seed, args.threads, str(args.out), params)
    io.write_json(Path(out_dir) / "manifest.json", rc.to_manifest())
    return rc


def _gnuplot(path, body):
    Path(path).write_text(body, encoding="utf-8")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_split(data_dir, split):
    path = Path(data_dir) / f"{split}.csv"
    return ingest_csv(path)


# --- subcommands ---------------------------------------------------------------


def cmd_topology(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spectrum = s4d_spectrum(args.variant, args.N, args.index_origin)
    K = reconstruct_coupling(spectrum.eigenvalues)
    mag, phase = coupling_fields(K)
    io.write_matrix_csv(out / "magnitude.csv", mag)
    io.write_matrix_csv(out / "phase.csv", phase)
    params = {"variant": args.variant, "N": args.N, "index_origin": args.index_origin}
    _manifest(args, out, params)
    if args.gnuplot:
        _gnuplot(out / "topology.gp",
                 "set datafile separator ','\nset view map\n"
                 "plot 'magnitude.csv' matrix rowheaders columnheaders with image\n")
    return {"circulant_residual": circulant_residual(K), "distance_profile": mag[0].tolist()}


def cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    params = ring_network(args.N, args.neighbours, args.kappa, args.lag, args.omega)
    if args.wavenumber:
        psi0 = 2 * np.pi * args.wavenumber * np.arange(args.N) / args.N
        psi0 = psi0 + args.noise * rng.standard_normal(args.N)
    else:
        psi0 = rng.uniform(-np.pi, np.pi, args.N)
    n_steps = int(round(args.t_end / args.dt))
    states = DynamicsOperator(coupling_matrix(params), args.dt).run(from_phase(psi0), n_steps)
    if args.omega:
        states = states * np.exp(1j * args.omega * args.dt * np.arange(1, n_steps + 1))[:, None]
    io.write_matrix_csv(out / "raster.csv", phase_raster(states))
    m, share = traveling_wave_score(states[n_steps // 2:])
    summary = {"dominant_wavenumber": m, "power_share": share}
    io.write_json(out / "summary.json", summary)
    _manifest(args, out, {k: getattr(args, k) for k in
                          ("N", "neighbours", "kappa", "lag", "omega", "t_end", "dt",
                           "wavenumber", "noise")})
    if args.gnuplot:
        _gnuplot(out / "raster.gp", "set datafile separator ','\nset view map\n"
                 "plot 'raster.csv' matrix columnheaders with image\n")
    return summary


def cmd_gen_data(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = _read_json(args.spec) if args.spec else {}
    d.setdefault("seed", args.seed)
    spec = SyntheticSpec.from_dict(d)
    ds = generate_synthetic(spec)
    tr, te = train_test(ds, spec.train_fraction, spec.seed)
    write_csv(tr, out / "train.csv")
    write_csv(te, out / "test.csv")
    params = asdict(spec)
    io.write_json(out / "spec.json", params)
    _manifest(args, out, params)
    return {"train": len(tr), "test": len(te)}


def _model_config(args, n_classes, channels):
    d = _read_json(args.config) if getattr(args, "config", None) else {}
    train_block = d.pop("train", {})
    d.setdefault("n_classes", n_classes)
    d.setdefault("channels", channels)
    d.setdefault("seed", args.seed)
    return ModelConfig.from_dict(d), train_block


def cmd_train(args):
    tr = _load_split(args.data, "train")
    te_path = Path(args.data) / "test.csv"
    te = ingest_csv(te_path) if te_path.exists() else None
    if args.classes:
        tr = tr.select_classes(args.classes)
        te = te.select_classes(args.classes) if te is not None else None
    config, block = _model_config(args, tr.n_classes, tr.channels)
    block.setdefault("seed", args.seed)
    if args.epochs is not None:
        block["epochs"] = args.epochs
    tcfg = TrainConfig(**block)
    model, hist = train(init_model(config), tr, tcfg, test=te)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    history = {"loss": hist.loss, "accuracy": hist.accuracy,
               "test_accuracy": hist.test_accuracy, "aborted": hist.aborted}
    io.save_checkpoint(model, out, extra={"history": history, "classes": args.classes})
    _manifest(args, out.parent, {"model": config.to_dict(), "train": asdict(tcfg),
                                 "data": str(args.data), "classes": args.classes})
    if hist.aborted:
        raise WaveSSMError("training diverged; checkpoint holds the last finite state")
    return {"epochs": len(hist.loss), "final_train_accuracy": hist.accuracy[-1],
            "test_accuracy": hist.test_accuracy[-1] if hist.test_accuracy else None}


def _load_for_ckpt(args, model_classes=None):
    model = io.load_checkpoint(args.ckpt)
    ds = _load_split(args.data, args.split)
    doc = _read_json(args.ckpt)
    classes = (doc.get("extra") or {}).get("classes")
    if classes:
        ds = ds.select_classes(classes)
    return model, ds


def cmd_eval(args):
    model, ds = _load_for_ckpt(args)
    m = evaluate(model, ds)
    summary = {k: m[k] for k in ("accuracy", "per_class_accuracy", "mean_margin", "confusion")}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "metrics.json", summary)
        _manifest(args, out, {"ckpt": args.ckpt, "data": args.data, "split": args.split})
    return summary


def _pairs(text):
    pairs = []
    for item in text.split(","):
        if item.strip():
            i, j = item.split(":")
            pairs.append((int(i) - 1, int(j) - 1))
    return pairs


def cmd_analyze_modes(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_split(args.data, args.split)
    if args.ckpt:
        model = io.load_checkpoint(args.ckpt)
    else:
        config, _ = _model_config(args, max(ds.n_classes, 1), ds.channels)
        model = init_model(config)
    tau = model.config.tau
    freqs = model.spectrum.mode_frequencies()
    energies, Z, pairs = [], [], _pairs(args.pairs)
    field = None
    for i in range(len(ds)):
        mu, _ = modal_states(model, ds.series[i])
        series = series_from_modal_states(mu[0], model.spectrum, tau)
        energies.append(modal_energy(series))
        Z.append([wave_interaction(series, a, b).Z for a, b in pairs])
        if i == args.trial:
            field = render_field(series, model.basis, pairs[0] if pairs else None)
    energies = np.array(energies)
    rows = [[ds.sample_ids[i], int(ds.labels[i])] + [float(e) for e in energies[i]]
            for i in range(len(ds))]
    io.write_rows_csv(out / "energies.csv", ["sample_id", "label"] +
                      [f"mode{j + 1}" for j in range(model.config.N)], rows)
    per_class = {int(c): energies[ds.labels == c] for c in np.unique(ds.labels)}
    ranking = class_separation_ranking(per_class)
    medians = class_separation_scores(per_class, "median")
    io.write_rows_csv(out / "ranking.csv", ["rank", "mode", "frequency", "score", "median_score"],
                      [[r + 1, j + 1, float(freqs[j]), s, float(medians[j])]
                       for r, (j, s) in enumerate(ranking)])
    io.write_rows_csv(out / "interactions.csv", ["sample_id", "label"] +
                      [f"Z_{a + 1}_{b + 1}" for a, b in pairs],
                      [[ds.sample_ids[i], int(ds.labels[i])] + [float(z) for z in Z[i]]
                       for i in range(len(ds))])
    if field is not None:
        io.write_matrix_csv(out / "field.csv", field)
    _manifest(args, out, {"ckpt": args.ckpt, "config": args.config, "data": args.data,
                          "split": args.split, "pairs": args.pairs, "trial": args.trial})
    top = ranking[0][0]
    return {"top_mode": top + 1, "top_frequency": float(freqs[top])}


def cmd_carleman_report(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, ds = _load_for_ckpt(args)
    fit = cm.chebyshev_fit_gelu(args.degree, tuple(args.domain))
    io.write_json(out / "fit.json", {"domain": list(fit.domain), "degree": fit.degree,
                                     "coefficients": fit.coeffs.tolist(),
                                     "chebyshev": fit.chebyshev.tolist(),
                                     "max_error": fit.max_error})
    analysed = correct_subset(model, ds)
    exact = margin_explained(model, analysed, None, correct_only=False)
    results = {}
    margins = {}
    for R in args.orders:
        res = margin_explained(model, analysed, R, fit=args.fit, domain=tuple(args.domain),
                               correct_only=False)
        results[str(R)] = {"fraction": res.fraction,
                           "fraction_mean_of_ratios": res.report.fraction_mean_of_ratios,
                           "domain": list(res.coeffs.domain),
                           "coefficients": res.coeffs.coeffs.tolist()}
        margins[R] = res.report.approx
    results["exact"] = {"fraction": exact.fraction,
                        "fraction_mean_of_ratios": exact.report.fraction_mean_of_ratios}
    header = ["sample_id", "full_margin"] + [f"margin_R{R}" for R in args.orders]
    io.write_rows_csv(out / "margins.csv", header,
                      [[analysed.sample_ids[i], float(exact.report.full[i])] +
                       [float(margins[R][i]) for R in args.orders] for i in range(len(analysed))])
    summary = {"n_analysed": len(analysed), "n_total": len(ds), "fit": args.fit,
               "fractions": results}
    io.write_json(out / "summary.json", summary)
    _manifest(args, out, {"ckpt": args.ckpt, "data": args.data, "split": args.split,
                          "orders": args.orders, "fit": args.fit, "degree": args.degree,
                          "domain": list(args.domain)})
    return summary


COMMANDS = {
    "topology": cmd_topology,
    "simulate": cmd_simulate,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "analyze-modes": cmd_analyze_modes,
    "carleman-report": cmd_carleman_report,
}


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(args.threads):
                summary = COMMANDS[args.command](args)
        else:
            summary = COMMANDS[args.command](args)
    except (WaveSSMError, OSError, IndexError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    if args.json:
        print(json.dumps(summary, sort_keys=True, default=io._json_default))
    return 0


def main():
    sys.exit(dispatch())
