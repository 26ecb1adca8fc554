"""Experiment harness: imbalance sweeps, ablations, sensitivity curves.

Every run regenerates its graph (or re-splits a given one), trains one
configuration and records the three headline metrics. Results come back
as lists of plain dict rows, in deterministic (ratio, seed, config)
order, and can be written to CSV for downstream analysis.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .graph import Graph, generate_synthetic, split_masks
from .metrics import MetricsReport
from .trainer import TrainConfig, evaluate, train

SWEEP_CONFIGS = ("full", "no_sampler", "no_cost", "vanilla")
SENSITIVITY_PARAMS = ("train_frac", "beta", "layers", "hidden_dim")


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings shared across a sweep; ratio and seed vary per run."""

    n: int = 2000
    k: int = 2
    homophily: float = 0.8
    feature_dim: int = 16
    class_separation: float = 1.0
    avg_degree: float = 20.0
    train_frac: float = 0.2
    val_frac: float = 0.2

    def build(self, ir: float, seed: int) -> Graph:
        g = generate_synthetic(self.n, self.k, ir, self.homophily,
                               self.feature_dim, self.class_separation, seed,
                               avg_degree=self.avg_degree)
        return split_masks(g, self.train_frac, self.val_frac, seed)


def _metric_row(report: MetricsReport) -> dict:
    row = {
        "macro_auc": report.macro_auc,
        "macro_recall": report.macro_recall,
        "g_mean": report.g_mean,
    }
    for c, r in enumerate(report.per_class_recall):
        row[f"recall_{c}"] = float(r)
    return row


def ir_sweep(spec: SyntheticSpec, irs, cfg: TrainConfig, seeds) -> list[dict]:
    """Train every configuration on freshly generated graphs per (ir, seed).

    Metrics are test-mask scores; all configurations of a given (ir, seed)
    share the same graph and splits.
    """
    rows = []
    for ir in irs:
        for seed in seeds:
            g = spec.build(float(ir), int(seed))
            for name in SWEEP_CONFIGS:
                run_cfg = dataclasses.replace(cfg, ablation=name, seed=int(seed))
                state, _ = train(g, run_cfg)
                report = evaluate(state, g, g.test_mask)
                rows.append({"ir": float(ir), "seed": int(seed), "config": name,
                             **_metric_row(report)})
    return rows


def ablation_run(g: Graph, cfg: TrainConfig) -> dict[str, MetricsReport]:
    """Full model and both single-module ablations on shared splits.

    All three runs use the same seed and the same masks; reports are
    test-mask metrics with per-class recalls.
    """
    reports = {}
    for name in ("full", "no_sampler", "no_cost"):
        run_cfg = dataclasses.replace(cfg, ablation=name)
        state, _ = train(g, run_cfg)
        reports[name] = evaluate(state, g, g.test_mask)
    return reports


def sensitivity_sweep(param: str, values, g: Graph, cfg: TrainConfig) -> list[dict]:
    """One training per value of a single hyperparameter, fixed seed.

    train_frac re-splits the given graph; the other parameters replace
    the matching config field.
    """
    if param not in SENSITIVITY_PARAMS:
        raise ValueError(f"param must be one of {SENSITIVITY_PARAMS}")
    rows = []
    for value in values:
        if param == "train_frac":
            run_g = split_masks(g, float(value), cfg.val_frac, cfg.seed)
            run_cfg = dataclasses.replace(cfg, train_frac=float(value))
        else:
            run_g = g
            field_type = type(getattr(cfg, param))
            run_cfg = dataclasses.replace(cfg, **{param: field_type(value)})
        state, _ = train(run_g, run_cfg)
        report = evaluate(state, run_g, run_g.test_mask)
        rows.append({"param": param, "value": float(value), **_metric_row(report)})
    return rows


def write_csv(rows: list[dict], path) -> None:
    """Write dict rows with a union-of-keys header, insertion ordered."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(rows[0].keys())
    for row in rows[1:]:
        for key in row:
            if key not in header:
                header.append(key)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        w.writerows(rows)


def ablation_rows(reports: dict[str, MetricsReport]) -> list[dict]:
    return [{"config": name, **_metric_row(report)} for name, report in reports.items()]
