"""Command-line interface.

Subcommands: generate, train, predict, eval, sweep-ir, ablate,
sensitivity, gradcheck. Results go to stdout or the requested output
files; errors go to stderr with exit code 1; usage problems exit 2.
The environment variable CSGNN_SEED supplies the seed when no --seed
flag or config value is given.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import harness, plots
from .gradcheck import end_to_end_errors, logit_gradient_max_error
from .graph import Graph, generate_synthetic, load_graph, save_graph, split_masks
from .trainer import (TrainConfig, config_file_keys, config_to_dict, evaluate,
                      load_config, predict, state_from_tensors, state_tensors, train)

_CONFIG_FLAGS = [
    ("--epochs", int), ("--layers", int), ("--hidden-dim", int),
    ("--lr", float), ("--cost-lr", float), ("--trans-weight", float),
    ("--beta", float), ("--p-step", float), ("--p-init", float),
    ("--p-min", float), ("--action-rule", str), ("--bandit-window", int),
    ("--seed", int), ("--ablation", str), ("--optimizer", str),
    ("--train-frac", float), ("--val-frac", float),
]
_CONFIG_BOOL_FLAGS = ["--use-bias", "--normalize-similarity"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    defaults = TrainConfig()
    for flag, typ in _CONFIG_FLAGS:
        field = flag.lstrip("-").replace("-", "_")
        p.add_argument(flag, type=typ, default=None,
                       help=f"override {field} (default {getattr(defaults, field)})")
    for flag in _CONFIG_BOOL_FLAGS:
        field = flag.lstrip("-").replace("-", "_")
        p.add_argument(flag, action=argparse.BooleanOptionalAction, default=None,
                       help=f"override {field} (default {getattr(defaults, field)})")
    p.add_argument("--config", default=None, help="flat key = value config file")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="edges.csv path")
    p.add_argument("--features", required=True, help="features.csv path")
    p.add_argument("--labels", required=True, help="labels.csv path")


def _add_synthetic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--ir", type=float, default=0.5, help="target imbalance ratio")
    p.add_argument("--homophily", type=float, default=0.8)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=1.0,
                   help="distance between class feature means")
    p.add_argument("--avg-degree", type=float, default=20.0)


def _resolve_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    updates = {}
    for flag, _ in _CONFIG_FLAGS:
        field = flag.lstrip("-").replace("-", "_")
        value = getattr(args, field)
        if value is not None:
            updates[field] = value
    for flag in _CONFIG_BOOL_FLAGS:
        field = flag.lstrip("-").replace("-", "_")
        value = getattr(args, field)
        if value is not None:
            updates[field] = value
    if "seed" not in updates and "CSGNN_SEED" in os.environ:
        file_sets_seed = args.config and "seed" in config_file_keys(args.config)
        if not file_sets_seed:
            updates["seed"] = int(os.environ["CSGNN_SEED"])
    return dataclasses.replace(cfg, **updates)


def _load_split_graph(args, cfg: TrainConfig) -> Graph:
    g = load_graph(args.edges, args.features, args.labels)
    return split_masks(g, cfg.train_frac, cfg.val_frac, cfg.seed)


def _write_json(payload: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csgnn",
        description="Cost-sensitive graph neural network for imbalanced "
                    "node classification, with bandit-driven neighbor sampling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a synthetic dataset as CSV files")
    _add_synthetic_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", help="train a model; writes checkpoint and metrics")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--checkpoint", default="model.ckpt")
    p.add_argument("--metrics", default="metrics.json")
    p.add_argument("--trace", default=None,
                   help="directory for bandit and cost-matrix trace CSVs")
    p.add_argument("--plot", default=None, help="write loss-curve PNG here")

    p = sub.add_parser("predict", help="write predictions for every node")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default="predictions.csv")

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", default=None, help="metrics JSON path (default stdout)")

    p = sub.add_parser("sweep-ir", help="train all configurations across imbalance ratios")
    _add_synthetic_flags(p)
    _add_config_flags(p)
    p.add_argument("--irs", type=_floats,
                   default=[round(0.1 * i, 1) for i in range(1, 11)])
    p.add_argument("--seeds", type=_ints, default=[0])
    p.add_argument("--out", default="ir_sweep.csv")
    p.add_argument("--plot", action="store_true", help="render a PNG next to the CSV")

    p = sub.add_parser("ablate", help="full model and both single-module ablations")
    _add_synthetic_flags(p)
    _add_config_flags(p)
    p.add_argument("--out", default="ablation.csv")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("sensitivity", help="metric curves over one hyperparameter")
    _add_synthetic_flags(p)
    _add_config_flags(p)
    p.add_argument("--param", required=True, choices=harness.SENSITIVITY_PARAMS)
    p.add_argument("--values", type=_floats, required=True)
    p.add_argument("--out", default=None,
                   help="CSV path (default sensitivity_<param>.csv)")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--instances", type=int, default=100)
    return parser


def _cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else int(os.environ.get("CSGNN_SEED", 0))
    g = generate_synthetic(args.n, args.k, args.ir, args.homophily,
                           args.feature_dim, args.separation, seed,
                           avg_degree=args.avg_degree)
    save_graph(g, args.out_dir)
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges, "
          f"{g.num_classes} classes to {args.out_dir}")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    g = _load_split_graph(args, cfg)
    state, report = train(g, cfg, trace_dir=args.trace)
    ckpt.save_checkpoint(args.checkpoint, state_tensors(state))
    _write_json({"metrics": report.to_dict(), "config": config_to_dict(cfg)},
                args.metrics)
    if args.plot:
        plots.plot_history(state.history, args.plot)
    print(f"checkpoint -> {args.checkpoint}")
    print(f"validation g_mean={report.g_mean:.4f} macro_auc={report.macro_auc:.4f} "
          f"macro_recall={report.macro_recall:.4f}")
    return 0


def _cmd_predict(args) -> int:
    cfg = _resolve_config(args)
    g = load_graph(args.edges, args.features, args.labels)
    state = state_from_tensors(ckpt.load_checkpoint(args.checkpoint), cfg)
    mask = np.ones(g.num_nodes, dtype=bool)
    preds, scores = predict(state, g, mask)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "pred"] + [f"prob_{c}" for c in range(scores.shape[1])])
        for v in range(g.num_nodes):
            w.writerow([v, int(preds[v])] + [repr(x) for x in scores[v].tolist()])
    print(f"predictions -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    g = _load_split_graph(args, cfg)
    state = state_from_tensors(ckpt.load_checkpoint(args.checkpoint), cfg)
    mask = {"train": g.train_mask, "val": g.val_mask, "test": g.test_mask}[args.split]
    report = evaluate(state, g, mask)
    payload = {"split": args.split, "metrics": report.to_dict(),
               "config": config_to_dict(cfg)}
    if args.out:
        _write_json(payload, args.out)
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def _synthetic_spec(args, cfg: TrainConfig) -> harness.SyntheticSpec:
    return harness.SyntheticSpec(n=args.n, k=args.k, homophily=args.homophily,
                                 feature_dim=args.feature_dim,
                                 class_separation=args.separation,
                                 avg_degree=args.avg_degree,
                                 train_frac=cfg.train_frac, val_frac=cfg.val_frac)


def _cmd_sweep_ir(args) -> int:
    cfg = _resolve_config(args)
    spec = _synthetic_spec(args, cfg)
    rows = harness.ir_sweep(spec, args.irs, cfg, args.seeds)
    harness.write_csv(rows, args.out)
    print(f"{len(rows)} rows -> {args.out}")
    if args.plot:
        png = plots.plot_ir_sweep(rows, Path(args.out).with_suffix(".png"))
        print(f"figure -> {png}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    g = _synthetic_spec(args, cfg).build(args.ir, cfg.seed)
    reports = harness.ablation_run(g, cfg)
    rows = harness.ablation_rows(reports)
    harness.write_csv(rows, args.out)
    print(f"{len(rows)} rows -> {args.out}")
    if args.plot:
        png = plots.plot_ablation(rows, Path(args.out).with_suffix(".png"))
        print(f"figure -> {png}")
    return 0


def _cmd_sensitivity(args) -> int:
    cfg = _resolve_config(args)
    g = _synthetic_spec(args, cfg).build(args.ir, cfg.seed)
    rows = harness.sensitivity_sweep(args.param, args.values, g, cfg)
    out = args.out or f"sensitivity_{args.param}.csv"
    harness.write_csv(rows, out)
    print(f"{len(rows)} rows -> {out}")
    if args.plot:
        png = plots.plot_sensitivity(rows, Path(out).with_suffix(".png"))
        print(f"figure -> {png}")
    return 0


def _cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else int(os.environ.get("CSGNN_SEED", 0))
    logit_err = logit_gradient_max_error(seed=seed, instances=args.instances)
    print(f"logit-gradient identity: max rel error {logit_err:.3e}")
    e2e = end_to_end_errors(seed=seed)
    worst = logit_err
    for name, err in sorted(e2e.items()):
        print(f"end-to-end {name}: rel error {err:.3e}")
        worst = max(worst, err)
    print(f"max relative error {worst:.3e}")
    return 0 if worst < 1e-4 else 1


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "sweep-ir": _cmd_sweep_ir,
    "ablate": _cmd_ablate,
    "sensitivity": _cmd_sensitivity,
    "gradcheck": _cmd_gradcheck,
}


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # runtime failure -> message on stderr, exit 1
        print(f"csgnn: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
