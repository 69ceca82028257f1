"""Command-line interface: ``sqrtcox {qut,fit,predict,simulate,benchmark}``.

Options come from built-in defaults, then an optional ``--config`` JSON
file, then explicit flags (highest precedence). Every output records the
command, the effective options, the seed and the library version.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ann import NetworkCoxModel
from .coxcore import LinearCoxModel, predict_survival
from .data import covariate_matrix_from_csv, load_csv, standardize, write_csv
from .errors import DataError, NumericalError
from .pipeline import FitConfig, fit_pipeline
from .qut import QutConfig, qut
from .simulate import SimConfig, generate, run_benchmark

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "SQRTCOX_THREADS"

DEFAULTS = {
    "qut": {"alpha": 0.05, "method": "gaussian", "replicates": 1000, "seed": 0,
            "time_col": "time", "event_col": "event", "out": "qut.json"},
    "fit": {"mode": "harder", "model": "linear", "hidden": [20], "activation": "relu",
            "alpha": 0.05, "qut_method": "gaussian", "replicates": 1000, "lam": None,
            "seed": 0, "time_col": "time", "event_col": "event",
            "out_model": "model.json", "out_report": "report.json"},
    "predict": {"times": None, "out": "predictions.csv"},
    "simulate": {"n": 150, "p": 100, "s": 0, "design": "linear", "h0": 1.0,
                 "censoring": 0.5, "seed": 0, "out": "simulated.csv"},
    "benchmark": {"grid": [0, 1, 2, 4, 8, 16], "replicates": 50, "method": "harder_qut",
                  "model": "linear", "n": 150, "p": 100, "design": "linear", "h0": 1.0,
                  "censoring": 0.5, "hidden": [20], "alpha": 0.05, "qut_replicates": 1000,
                  "seed": 0, "threads": None, "out_dir": "benchmark"},
}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _model_kind(text: str) -> str:
    kinds = {"linear": "linear", "net": "network", "network": "network"}
    if text not in kinds:
        raise argparse.ArgumentTypeError("model must be 'linear' or 'net'")
    return kinds[text]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="sqrtcox", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", metavar="JSON", help="JSON file of option defaults")
        if seed:
            p.add_argument("--seed", type=int, default=S)

    p = sub.add_parser("qut", help="compute the quantile universal threshold")
    common(p)
    p.add_argument("data", help="CSV with time, event and covariate columns")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--method", choices=("gaussian", "bootstrap"), default=S)
    p.add_argument("--replicates", type=int, default=S)
    p.add_argument("--time-col", dest="time_col", default=S)
    p.add_argument("--event-col", dest="event_col", default=S)
    p.add_argument("--out", default=S)

    p = sub.add_parser("fit", help="QUT-calibrated sparse fit")
    common(p)
    p.add_argument("data")
    p.add_argument("--mode", choices=("harder", "lasso"), default=S)
    p.add_argument("--model", type=_model_kind, default=S, help="linear or net")
    p.add_argument("--hidden", type=_int_list, default=S, help="hidden widths, e.g. 20 or 20,10")
    p.add_argument("--activation", choices=("relu", "tanh"), default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--qut-method", dest="qut_method", choices=("gaussian", "bootstrap"),
                   default=S)
    p.add_argument("--replicates", type=int, default=S, help="QUT Monte-Carlo size")
    p.add_argument("--lambda", dest="lam", type=float, default=S,
                   help="final penalty level; skips QUT")
    p.add_argument("--time-col", dest="time_col", default=S)
    p.add_argument("--event-col", dest="event_col", default=S)
    p.add_argument("--out-model", dest="out_model", default=S)
    p.add_argument("--out-report", dest="out_report", default=S)

    p = sub.add_parser("predict", help="survival probabilities from a fitted model")
    common(p, seed=False)
    p.add_argument("model", help="model JSON written by 'fit'")
    p.add_argument("newdata", help="CSV with the training covariate columns")
    p.add_argument("--times", type=_float_list, default=S, help="e.g. 1,2,5")
    p.add_argument("--out", default=S)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--p", type=int, default=S)
    p.add_argument("--s", type=int, default=S)
    p.add_argument("--design", choices=("linear", "abs_pairs"), default=S)
    p.add_argument("--h0", type=float, default=S)
    p.add_argument("--censoring", type=float, default=S, help="target censored fraction")
    p.add_argument("--out", default=S)

    p = sub.add_parser("benchmark", help="replicated support-recovery study")
    common(p)
    p.add_argument("--grid", type=_int_list, default=S, help="sparsity levels, e.g. 0,1,2,4")
    p.add_argument("--replicates", type=int, default=S)
    p.add_argument("--method", choices=("harder_qut", "lasso_qut"), default=S)
    p.add_argument("--mode", dest="method", default=S,
                   type=lambda v: {"harder": "harder_qut", "lasso": "lasso_qut"}.get(v, v),
                   help="alias of --method (harder|lasso)")
    p.add_argument("--model", type=_model_kind, default=S, help="linear or net")
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--p", type=int, default=S)
    p.add_argument("--design", choices=("linear", "abs_pairs"), default=S)
    p.add_argument("--h0", type=float, default=S)
    p.add_argument("--censoring", type=float, default=S)
    p.add_argument("--hidden", type=_int_list, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--qut-replicates", dest="qut_replicates", type=int, default=S)
    p.add_argument("--threads", type=int, default=S,
                   help=f"worker processes (default: ${THREADS_ENV} or 1)")
    p.add_argument("--out-dir", dest="out_dir", default=S)
    return parser


def effective_options(command: str, ns: argparse.Namespace) -> dict:
    """Defaults <- config file <- explicit flags."""
    opts = dict(DEFAULTS[command])
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_opts = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {ns.config} is not valid JSON: {exc}") from None
        if not isinstance(file_opts, dict):
            raise UsageError(f"config {ns.config} must hold a JSON object")
        file_opts = {k.replace("-", "_"): v for k, v in file_opts.items()}
        if "lambda" in file_opts:
            file_opts["lam"] = file_opts.pop("lambda")
        unknown = sorted(set(file_opts) - set(opts))
        if unknown:
            raise UsageError(f"config {ns.config}: unknown option {unknown[0]!r} for {command}")
        opts.update(file_opts)
    opts.update(flags)
    return opts


def _meta(command: str, opts: dict) -> dict:
    return {"command": command, "version": __version__, "seed": opts.get("seed"),
            "config": opts}


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_qut(opts: dict) -> None:
    try:
        cfg = QutConfig(opts["alpha"], opts["replicates"], opts["method"], opts["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    d = load_csv(opts["data"], opts["time_col"], opts["event_col"])
    ds, _ = standardize(d)
    res = qut(ds, cfg)
    _write_json(opts["out"], {**_meta("qut", opts), "result": res.to_dict()})
    print(f"lambda_qut = {res.lambda_qut:.6g} -> {opts['out']}")


def cmd_fit(opts: dict) -> None:
    try:
        cfg = FitConfig(mode=opts["mode"], model=opts["model"], hidden=tuple(opts["hidden"]),
                        activation=opts["activation"], alpha=opts["alpha"],
                        qut_method=opts["qut_method"], qut_replicates=opts["replicates"],
                        lam=opts["lam"], seed=opts["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    d = load_csv(opts["data"], opts["time_col"], opts["event_col"])
    res = fit_pipeline(d, cfg)
    meta = _meta("fit", opts)
    model = res.model.to_dict()
    model["selected_features"] = [d.feature_names[j] for j in sorted(res.model.support)]
    _write_json(opts["out_model"], {**meta, "model": model})
    report = {
        **meta,
        "lambda": res.lambda_used,
        "qut": None if res.qut is None else res.qut.to_dict(),
        "fit": res.report.to_dict(include_traces=True),
    }
    _write_json(opts["out_report"], report)
    names = model["selected_features"]
    print(f"selected {len(names)} of {d.p} features: {', '.join(names) or '(none)'}")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    model = obj.get("model", obj)
    kind = model.get("kind") if isinstance(model, dict) else None
    try:
        if kind == "linear":
            return LinearCoxModel.from_dict(model)
        if kind == "network":
            return NetworkCoxModel.from_dict(model)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed model ({exc})") from None
    raise DataError(f"{path}: not a model file (kind={kind!r})")


def cmd_predict(opts: dict) -> None:
    times = opts["times"]
    if not times:
        raise UsageError("--times is required (e.g. --times 1,2,5)")
    if any(t < 0 for t in times):
        raise UsageError("prediction times must be non-negative")
    model = load_model(opts["model"])
    if not model.feature_names:
        raise DataError(f"{opts['model']}: model has no feature names")
    X = covariate_matrix_from_csv(opts["newdata"], model.feature_names)
    surv = predict_survival(model, X, times)
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(_meta("predict", opts), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["row", *(f"S({t!r})" for t in times)])
        for i, row in enumerate(np.atleast_2d(surv)):
            w.writerow([i + 1, *(repr(float(v)) for v in row)])
    print(f"{surv.shape[0]} rows x {len(times)} times -> {out}")


def cmd_simulate(opts: dict) -> None:
    try:
        cfg = SimConfig(n=opts["n"], p=opts["p"], s=opts["s"], design=opts["design"],
                        h0=opts["h0"], target_censoring=opts["censoring"], seed=opts["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    d, truth = generate(cfg)
    meta = _meta("simulate", opts)
    meta["truth"] = {"support": [d.feature_names[j] for j in truth.support],
                     "coefficients": truth.coefficients.tolist(), "cutoff": truth.cutoff}
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(d, out, comment=json.dumps(meta, sort_keys=True))
    print(f"n={d.n} p={d.p} censored={1 - d.events.mean():.3f} -> {out}")


def resolve_threads(value) -> int:
    if value is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"${THREADS_ENV} must be an integer, got {env!r}") from None
    if value < 1:
        raise UsageError("thread count must be >= 1")
    return int(value)


def cmd_benchmark(opts: dict) -> None:
    opts["threads"] = threads = resolve_threads(opts["threads"])
    try:
        template = SimConfig(n=opts["n"], p=opts["p"], design=opts["design"], h0=opts["h0"],
                             target_censoring=opts["censoring"], seed=opts["seed"])
        for s in opts["grid"]:
            SimConfig(n=opts["n"], p=opts["p"], s=s, design=opts["design"])
        QutConfig(opts["alpha"], opts["qut_replicates"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = run_benchmark(opts["grid"], template, opts["replicates"], opts["method"],
                           opts["model"], hidden=tuple(opts["hidden"]), alpha=opts["alpha"],
                           qut_replicates=opts["qut_replicates"], threads=threads)
    meta = _meta("benchmark", opts)
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    report.write_tidy_csv(out / "replicates.csv", meta)
    report.write_aggregate_csv(out / "summary.csv", meta)
    body = report.to_dict()
    _write_json(out / "report.json", {**meta, "benchmark_config": body["config"],
                                      "aggregates": body["aggregates"], "rows": body["rows"]})
    for a in report.aggregates:
        flag = "  FLAGGED" if a["flagged"] else ""
        print(f"s={a['s']:>3}  pesr={a['pesr']:.3f}  tpr={a['tpr']:.3f}  fdr={a['fdr']:.3f}  "
              f"cindex={a['cindex']:.3f}  ok={a['replicates']}{flag}")


COMMANDS = {"qut": cmd_qut, "fit": cmd_fit, "predict": cmd_predict,
            "simulate": cmd_simulate, "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        opts = effective_options(ns.command, ns)
        COMMANDS[ns.command](opts)
    except UsageError as exc:
        print(f"sqrtcox {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sqrtcox {ns.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"sqrtcox {ns.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
