"""Command-line front end.

Every subcommand writes its outputs plus one JSON run manifest. Settings are
resolved as flags > ``--config`` JSON file > defaults, and the default seed
comes from ``JUDGECAL_SEED`` when set.

Exit codes: 0 success, 1 validation error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .calibrate import Box, FitConfig, fit_arrays
from .core import DavidsonParams, Smoothing, TernaryDistribution, features_from_counts
from .data_io import (Prediction, atomic_write_text, build_dataset, gold_labels, read_labels,
                      read_predictions, read_votes, write_labels, write_predictions, write_votes)
from .errors import InsufficientData, JudgecalError, NumericFailure
from .metaeval import (FixedBTD, SelfConsistency, SignificanceConfig, SplitConfig,
                       calibration_size_sweep, leave_one_out, make_method, order_balance_report,
                       run_splits, summarize, transfer_matrix)
from .rng import SEED_ENV
from .synthetic import GeneratorConfig, generate_synthetic

log = logging.getLogger("judgecal")

METHODS = ("btd", "sc", "soft-sc", "ci-sc", "median")

DEFAULTS = {
    "alpha": 1.0,
    "kappa": 1.0,
    "ratio": 0.05,
    "splits": 100,
    "resamples": 100,
    "tau": 0.05,
    "restarts": 8,
    "max_iter": 200,
    "gtol": 1e-8,
    "box": list(Box().flat()),
    "method": "btd",
    "methods": ["btd", "sc"],
    "reducer": "mean",
    "sizes": [20, 40, 60, 80, 100, 120, 140, 160, 180, 200],
    "items": 1000,
    "votes_per_item": 12,
    "beta": 1.0,
    "nu": 1.0,
    "gamma": 1.0,
    "concentration": [2.0, 2.0, 2.0],
    "order_bias": 0.0,
    "n": 20,
}

PATH_KEYS = {"votes", "labels", "params", "ratings", "predictions", "out", "out_dir", "config",
             "params_files", "tasks"}
OUTPUT_KEYS = {"out", "out_dir"}


class UsageError(JudgecalError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _portable(value):
    if isinstance(value, (list, tuple)):
        return [_portable(v) for v in value]
    if isinstance(value, str) and os.path.sep in value:
        return os.path.basename(value)
    return value


def write_manifest(path, command: str, cfg: dict, inputs: Sequence[str]) -> None:
    """Run manifest. Input paths are reduced to basenames and output paths are
    left out, so reruns into other directories produce identical bytes."""
    snapshot = {k: (_portable(v) if k in PATH_KEYS else v)
                for k, v in sorted(cfg.items()) if not k.startswith("_") and k not in OUTPUT_KEYS}
    manifest = {
        "command": command,
        "config": snapshot,
        "seed": cfg["seed"],
        "inputs": [{"name": os.path.basename(p), "sha256": _digest(p)} for p in inputs],
        "tool_version": __version__,
    }
    atomic_write_text(path, _json(manifest))


def _fit_config(cfg) -> FitConfig:
    return FitConfig(box=Box.from_flat(cfg["box"]), restarts=cfg["restarts"], seed=cfg["seed"],
                     max_iterations=cfg["max_iter"], gradient_tolerance=cfg["gtol"])


def _smoothing(cfg) -> Smoothing:
    return Smoothing(cfg["alpha"], cfg["kappa"])


def _split(cfg) -> SplitConfig:
    return SplitConfig(cfg["ratio"], cfg["splits"], cfg["seed"])


def _load_dataset(votes_path, labels_path):
    votes = read_votes(votes_path)
    if not votes:
        raise InsufficientData(f"{votes_path} contains no votes")
    return votes, build_dataset(votes, gold_labels(read_labels(labels_path)))


def read_params(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        params = DavidsonParams(float(obj["beta"]), float(obj["nu"]), float(obj["gamma"]))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{path}: params file needs beta, nu and gamma ({exc})") from None
    smoothing = Smoothing(float(obj.get("alpha", 1.0)), float(obj.get("kappa", 1.0)))
    return params, smoothing


def _out_dir(cfg) -> str:
    os.makedirs(cfg["out_dir"], exist_ok=True)
    return cfg["out_dir"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_calibrate(cfg) -> int:
    _, data = _load_dataset(cfg["votes"], cfg["labels"])
    smoothing = _smoothing(cfg)
    s, t = features_from_counts(data.counts, smoothing.alpha, smoothing.kappa)
    result = fit_arrays(s, t, data.truth, _fit_config(cfg))
    p = result.params
    out = {"beta": p.beta, "nu": p.nu, "gamma": p.gamma, "objective": result.objective,
           "converged": result.converged, "alpha": smoothing.alpha, "kappa": smoothing.kappa,
           "items": len(data), "restart_index": result.restart_index}
    atomic_write_text(cfg["out"], _json(out))
    write_manifest(cfg["out"] + ".manifest.json", "calibrate", cfg, [cfg["votes"], cfg["labels"]])

    print(f"{'restart':>7} {'beta':>10} {'nu':>12} {'gamma':>10} {'objective':>14} {'iters':>5} converged")
    for r in result.restarts:
        mark = "*" if r.index == result.restart_index else " "
        print(f"{r.index:>6}{mark} {r.params.beta:10.5f} {r.params.nu:12.5g} {r.params.gamma:10.5f} "
              f"{r.objective:14.10f} {r.iterations:5d} {r.converged}")
    return 0


def cmd_aggregate(cfg) -> int:
    votes = read_votes(cfg["votes"])
    if not votes:
        raise InsufficientData(f"{cfg['votes']} contains no votes")
    data = build_dataset(votes)
    inputs = [cfg["votes"]]
    method = cfg["method"]
    if method == "btd":
        if not cfg.get("params"):
            raise UsageError("--params is required for --method btd")
        params, smoothing = read_params(cfg["params"])
        if "alpha" in cfg.get("_explicit", ()) or "kappa" in cfg.get("_explicit", ()):
            smoothing = _smoothing(cfg)
        agg = FixedBTD(params, smoothing)
        dists = agg.probs(data)
        labels = agg.predict(data)
        preds = [Prediction(i, int(y), TernaryDistribution.from_array(d))
                 for i, y, d in zip(data.item_ids, labels, dists)]
        inputs.append(cfg["params"])
    else:
        labels = make_method(method, reducer=cfg["reducer"]).predict(data)
        preds = [Prediction(i, int(y)) for i, y in zip(data.item_ids, labels)]
    write_predictions(cfg["out"], preds)
    write_manifest(cfg["out"] + ".manifest.json", "aggregate", cfg, inputs)
    print(f"wrote {len(preds)} predictions to {cfg['out']}")
    return 0


def _param_rows(run) -> List[list]:
    rows = []
    for mid, plist in run.params.items():
        for s, p in enumerate(plist):
            rows.append([mid, s, p.beta, p.nu, p.gamma])
    return rows


def _param_stats(run) -> Dict[str, dict]:
    stats = {}
    for mid, plist in run.params.items():
        stats[mid] = {}
        for name in ("beta", "nu", "gamma"):
            v = np.array([getattr(p, name) for p in plist])
            q25, q75 = np.percentile(v, [25, 75])
            stats[mid][name] = {"mean": float(v.mean()), "q25": float(q25), "q75": float(q75)}
    return stats


def cmd_evaluate(cfg) -> int:
    _, data = _load_dataset(cfg["votes"], cfg["labels"])
    methods = [make_method(m, _fit_config(cfg), _smoothing(cfg), cfg["reducer"]) for m in cfg["methods"]]
    run = run_splits(data, methods, _split(cfg))
    summary = summarize(run, SignificanceConfig(cfg["resamples"], cfg["tau"], cfg["seed"]))
    out = _out_dir(cfg)

    score_rows = []
    for mid in run.method_ids:
        maes, pas = run.mae(mid), run.pa(mid)
        for s in range(run.num_splits):
            score_rows.append([mid, s, float(maes[s]), float(pas[s]), len(run.evaluation[s])])
    atomic_write_text(os.path.join(out, "scores.csv"),
                      _csv(["method_id", "split", "mae", "pairwise_accuracy", "n_eval"], score_rows))

    conf_rows, histograms = [], {}
    for mid in run.method_ids:
        rep = run.confusion(mid)
        for i, truth in enumerate((-1, 0, 1)):
            for j, pred in enumerate((-1, 0, 1)):
                conf_rows.append([mid, truth, pred, float(rep.counts[i, j]), float(rep.row_percent[i, j])])
        histograms[mid] = {"predicted": [float(x) for x in rep.predicted_histogram],
                           "truth": [float(x) for x in rep.truth_histogram]}
    atomic_write_text(os.path.join(out, "confusion.csv"),
                      _csv(["method_id", "truth", "predicted", "mean_count", "row_percent"], conf_rows))

    result = summary.to_dict()
    result["label_histograms"] = histograms
    if run.params:
        atomic_write_text(os.path.join(out, "params.csv"),
                          _csv(["method_id", "split", "beta", "nu", "gamma"], _param_rows(run)))
        result["fitted_params"] = _param_stats(run)
    result["splits"] = run.num_splits
    result["items"] = len(data)
    atomic_write_text(os.path.join(out, "summary.json"), _json(result))
    write_manifest(os.path.join(out, "manifest.json"), "evaluate", cfg, [cfg["votes"], cfg["labels"]])

    for m in result["methods"]:
        print(f"{m['method_id']:>10}  MAE {m['mae']:.4f} ±{m['mae_ci95']:.4f} (rank {m['mae_rank']})  "
              f"PA {m['pairwise_accuracy']:.4f} ±{m['pairwise_accuracy_ci95']:.4f} (rank {m['pa_rank']})")
    return 0


def cmd_sweep(cfg) -> int:
    _, data = _load_dataset(cfg["votes"], cfg["labels"])
    points = calibration_size_sweep(data, cfg["sizes"], _split(cfg), _fit_config(cfg), _smoothing(cfg))
    rows = [[p.size, p.mean_mae, p.ci95, len(p.maes)] for p in points]
    atomic_write_text(cfg["out"], _csv(["size", "mean_mae", "ci95", "splits"], rows))
    write_manifest(cfg["out"] + ".manifest.json", "sweep", cfg, [cfg["votes"], cfg["labels"]])
    for r in rows:
        print(f"size {r[0]:>5}: MAE {r[1]:.4f} ±{r[2]:.4f}")
    return 0


def _parse_task(text: str):
    name, sep, rest = text.partition("=")
    parts = rest.split(",")
    if not sep or len(parts) != 2:
        raise UsageError(f"--task expects NAME=VOTES,LABELS, got {text!r}")
    return name, parts[0], parts[1]


def cmd_transfer(cfg) -> int:
    tasks = [_parse_task(t) for t in cfg["tasks"]]
    datasets = [_load_dataset(v, l)[1] for _, v, l in tasks]
    matrix = transfer_matrix(datasets, _split(cfg), _fit_config(cfg), _smoothing(cfg))
    names = [n for n, _, _ in tasks]
    rows = [[src] + [float(x) for x in matrix[i]] for i, src in enumerate(names)]
    atomic_write_text(cfg["out"], _csv(["source"] + names, rows))
    write_manifest(cfg["out"] + ".manifest.json", "transfer", cfg,
                   [p for _, v, l in tasks for p in (v, l)])
    for r in rows:
        print(r[0], " ".join(f"{x:+.4f}" for x in r[1:]))
    return 0


def cmd_loo(cfg) -> int:
    labels = read_labels(cfg["ratings"])
    preds = {p.item_id: p.label for p in read_predictions(cfg["predictions"])}
    raters = sorted({lab.rater_id for lab in labels if lab.rater_id is not None})
    if any(lab.rater_id is None for lab in labels):
        raise UsageError("every rating needs a rater_id for leave-one-out")
    items = sorted({lab.item_id for lab in labels if lab.item_id in preds})
    if not items:
        raise InsufficientData("no rated item has a system prediction")
    row_of = {i: k for k, i in enumerate(items)}
    col_of = {r: k for k, r in enumerate(raters)}
    matrix = np.full((len(items), len(raters)), np.nan)
    for lab in labels:
        if lab.item_id in row_of:
            matrix[row_of[lab.item_id], col_of[lab.rater_id]] = lab.truth
    rows = leave_one_out(matrix, np.array([preds[i] for i in items]), raters)
    wins = sum(r.win for r in rows)
    table = [[r.rater, r.human_pa, r.system_pa, "yes" if r.win else "no", r.items] for r in rows]
    table.append(["wins", "", "", f"{wins}/{len(rows)}", ""])
    atomic_write_text(cfg["out"], _csv(["rater", "human_pa", "system_pa", "win", "items"], table))
    write_manifest(cfg["out"] + ".manifest.json", "loo", cfg, [cfg["ratings"], cfg["predictions"]])
    for r in rows:
        print(f"{r.rater:>8}  human {r.human_pa:.3f}  system {r.system_pa:.3f}  {'win' if r.win else '-'}")
    print(f"wins {wins}/{len(rows)}")
    return 0


def cmd_simulate(cfg) -> int:
    gen = GeneratorConfig(
        theta_true=DavidsonParams(cfg["beta"], cfg["nu"], cfg["gamma"]),
        num_items=cfg["items"], votes_per_item=cfg["votes_per_item"],
        dirichlet_concentration=tuple(cfg["concentration"]), order_bias=cfg["order_bias"],
        seed=cfg["seed"])
    data = generate_synthetic(gen)
    out = _out_dir(cfg)
    write_votes(os.path.join(out, "votes.jsonl"), data.records())
    write_labels(os.path.join(out, "labels.jsonl"), data.labels())
    write_predictions(os.path.join(out, "truth.jsonl"), [
        Prediction(i, int(y), TernaryDistribution.from_array(d))
        for i, y, d in zip(data.item_ids, data.truth, data.true_dist)])
    write_manifest(os.path.join(out, "manifest.json"), "simulate", cfg, [])
    print(f"wrote {gen.num_items} items x {gen.votes_per_item} votes to {out} "
          f"(Bayes MAE {data.bayes_mae():.4f})")
    return 0


def region_table(n: int, columns: Sequence[tuple]) -> List[list]:
    """Rows ``[c_plus, c_minus, c_tie, verdict...]`` for every split of ``n`` votes."""
    from .data_io import dataset_from_counts

    cells = [(cp, cm) for cp in range(n + 1) for cm in range(n + 1 - cp)]
    counts = np.array([[cm, n - cp - cm, cp] for cp, cm in cells], dtype=np.int64)
    data = dataset_from_counts(counts, np.zeros(len(cells), dtype=np.int64))
    verdicts = [method.predict(data) for _, method in columns]
    return [[cp, cm, n - cp - cm] + [int(v[k]) for v in verdicts] for k, (cp, cm) in enumerate(cells)]


def cmd_regions(cfg) -> int:
    n = cfg["n"]
    if n < 1:
        raise UsageError("--n must be >= 1")
    columns = []
    for name in cfg.get("region_methods") or []:
        if name != "sc":
            raise UsageError("regions supports --method sc; add BTD columns with --params or --btd")
        columns.append(("sc", SelfConsistency()))
    inputs = []
    for path in cfg.get("params_files") or []:
        params, smoothing = read_params(path)
        columns.append((f"btd[{os.path.basename(path)}]", FixedBTD(params, smoothing)))
        inputs.append(path)
    for triple in cfg.get("btd") or []:
        b, nu, g = triple
        columns.append((f"btd[beta={b:g},nu={nu:g},gamma={g:g}]",
                        FixedBTD(DavidsonParams(b, nu, g), _smoothing(cfg))))
    if not columns:
        columns.append(("sc", SelfConsistency()))
    rows = region_table(n, columns)
    atomic_write_text(cfg["out"], _csv(["c_plus", "c_minus", "c_tie"] + [c[0] for c in columns], rows))
    write_manifest(cfg["out"] + ".manifest.json", "regions", cfg, inputs)
    print(f"wrote {len(rows)} cells for n={n}")
    return 0


def cmd_order_report(cfg) -> int:
    votes = read_votes(cfg["votes"])
    gold = gold_labels(read_labels(cfg["labels"]))
    method = make_method(cfg["method"], _fit_config(cfg), _smoothing(cfg), cfg["reducer"])
    rep = order_balance_report(votes, gold, method, _split(cfg), _fit_config(cfg), _smoothing(cfg))
    out = {"method": cfg["method"], "first_only_mae": rep.first_only,
           "second_only_mae": rep.second_only, "balanced_mae": rep.balanced}
    atomic_write_text(cfg["out"], _json(out))
    write_manifest(cfg["out"] + ".manifest.json", "order-report", cfg, [cfg["votes"], cfg["labels"]])
    print(f"first {rep.first_only:.4f}  second {rep.second_only:.4f}  balanced {rep.balanced:.4f}")
    return 0


_FIT = {"alpha", "kappa", "restarts", "box", "max_iter", "gtol"}
_SPLIT = {"ratio", "splits"}

COMMAND_KEYS = {
    "calibrate": {"votes", "labels", "out"} | _FIT,
    "aggregate": {"votes", "params", "out", "method", "reducer", "alpha", "kappa"},
    "evaluate": {"votes", "labels", "out_dir", "methods", "reducer", "resamples", "tau"} | _FIT | _SPLIT,
    "sweep": {"votes", "labels", "out", "sizes"} | _FIT | _SPLIT,
    "transfer": {"tasks", "out"} | _FIT | _SPLIT,
    "loo": {"ratings", "predictions", "out"},
    "simulate": {"out_dir", "items", "votes_per_item", "beta", "nu", "gamma", "concentration", "order_bias"},
    "regions": {"n", "region_methods", "params_files", "btd", "out", "alpha", "kappa"},
    "order-report": {"votes", "labels", "out", "method", "reducer"} | _FIT | _SPLIT,
}

COMMANDS = {
    "calibrate": cmd_calibrate,
    "aggregate": cmd_aggregate,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "transfer": cmd_transfer,
    "loo": cmd_loo,
    "simulate": cmd_simulate,
    "regions": cmd_regions,
    "order-report": cmd_order_report,
}


# ---------------------------------------------------------------------------
# parser


def _add(p, *names, **kw):
    p.add_argument(*names, default=argparse.SUPPRESS, **kw)


def _smoothing_flags(p):
    _add(p, "--alpha", type=float, help="margin smoothing (default 1)")
    _add(p, "--kappa", type=float, help="tie smoothing (default 1)")


def _fit_flags(p):
    _add(p, "--restarts", type=int, help="L-BFGS-B restarts (default 8)")
    _add(p, "--box", type=_floats,
         help="beta_lo,beta_hi,nu_lo,nu_hi,gamma_lo,gamma_hi (default 1e-3,5,1e-4,1e3,-10,10)")
    _add(p, "--max-iter", dest="max_iter", type=int, help="iterations per restart (default 200)")
    _add(p, "--gtol", type=float, help="projected-gradient tolerance (default 1e-8)")


def _split_flags(p):
    _add(p, "--ratio", type=float, help="calibration fraction per split (default 0.05)")
    _add(p, "--splits", type=int, help="number of random splits (default 100)")


def _method_flag(p, dest="method", repeat=False):
    kw = {"action": "append"} if repeat else {}
    _add(p, "--method", dest=dest, choices=METHODS, **kw)
    _add(p, "--reducer", choices=("min", "mean", "product"), help="Soft-SC reducer (default mean)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="judgecal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"judgecal {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    _add(common, "--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
    _add(common, "--config", help="JSON file of default settings")
    _add(common, "-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="fit Davidson parameters")
    p.add_argument("--votes", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="params JSON")
    _smoothing_flags(p)
    _fit_flags(p)

    p = sub.add_parser("aggregate", parents=[common], help="aggregate votes into verdicts")
    p.add_argument("--votes", required=True)
    _add(p, "--params")
    p.add_argument("--out", required=True, help="predictions JSONL")
    _method_flag(p)
    _smoothing_flags(p)

    p = sub.add_parser("evaluate", parents=[common], help="repeated-split meta-evaluation")
    p.add_argument("--votes", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _method_flag(p, dest="methods", repeat=True)
    _split_flags(p)
    _add(p, "--resamples", type=int, help="permutation resamples per split (default 100)")
    _add(p, "--tau", type=float, help="significance level (default 0.05)")
    _smoothing_flags(p)
    _fit_flags(p)

    p = sub.add_parser("sweep", parents=[common], help="calibration-set size sweep")
    p.add_argument("--votes", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="CSV")
    _add(p, "--sizes", type=_ints, help="comma-separated sizes (default 20..200 step 20)")
    _split_flags(p)
    _smoothing_flags(p)
    _fit_flags(p)

    p = sub.add_parser("transfer", parents=[common], help="cross-task calibration transfer matrix")
    p.add_argument("--task", dest="tasks", action="append", required=True, metavar="NAME=VOTES,LABELS")
    p.add_argument("--out", required=True, help="CSV")
    _split_flags(p)
    _smoothing_flags(p)
    _fit_flags(p)

    p = sub.add_parser("loo", parents=[common], help="leave-one-out comparison with human raters")
    p.add_argument("--ratings", required=True, help="labels JSONL with rater_id")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True, help="CSV")

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic vote set")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add(p, "--items", type=int)
    _add(p, "--votes-per-item", dest="votes_per_item", type=int)
    _add(p, "--beta", type=float)
    _add(p, "--nu", type=float)
    _add(p, "--gamma", type=float)
    _add(p, "--concentration", type=_floats, help="Dirichlet (minus,tie,plus), default 2,2,2")
    _add(p, "--order-bias", dest="order_bias", type=float)

    p = sub.add_parser("regions", parents=[common], help="decision regions over all count splits of n")
    _add(p, "--n", type=int, help="votes per item (default 20)")
    _add(p, "--method", dest="region_methods", action="append", choices=("sc",))
    _add(p, "--params", dest="params_files", action="append", help="params JSON (repeatable)")
    _add(p, "--btd", action="append", type=_floats, metavar="BETA,NU,GAMMA")
    p.add_argument("--out", required=True, help="CSV")
    _smoothing_flags(p)

    p = sub.add_parser("order-report", parents=[common], help="single-order vs balanced MAE")
    p.add_argument("--votes", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="JSON")
    _method_flag(p)
    _split_flags(p)
    _smoothing_flags(p)
    _fit_flags(p)
    return parser


def resolve(args: argparse.Namespace, environ=os.environ) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    explicit = dict(vars(args))
    cfg = dict(DEFAULTS)
    env_seed = environ.get(SEED_ENV)
    cfg["seed"] = int(env_seed) if env_seed not in (None, "") else 0
    if "config" in explicit:
        with open(explicit["config"], encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise UsageError(f"{explicit['config']}: config must be a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    cfg.update(explicit)
    cfg["_explicit"] = tuple(sorted(explicit))
    for triple in cfg.get("btd") or []:
        if len(triple) != 3:
            raise UsageError("--btd expects BETA,NU,GAMMA")
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        command = cfg.pop("command")
        keep = COMMAND_KEYS[command] | {"seed", "config", "_explicit"}
        cfg = {k: v for k, v in cfg.items() if k in keep or k in cfg["_explicit"]}
        cfg.pop("verbose", None)
        return COMMANDS[command](cfg)
    except NumericFailure as exc:
        print(f"judgecal: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (JudgecalError, ValueError, OSError) as exc:
        print(f"judgecal: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
