"""Figure rendering for sweep and training outputs.

Renders PNG files next to the delimited output; never opens a window
(Agg backend). Each helper takes the same row dicts the CSV writers
consume, so plots can be regenerated from any saved table.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}

METRICS = ("macro_auc", "macro_recall", "g_mean")


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_ir_sweep(rows: list[dict], out_path) -> Path:
    """One panel per metric, one curve per configuration, seeds averaged."""
    configs = sorted({r["config"] for r in rows})
    irs = sorted({r["ir"] for r in rows})
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(METRICS), figsize=(12.0, 3.6))
        for ax, metric in zip(axes, METRICS):
            for config in configs:
                ys = []
                for ir in irs:
                    vals = [r[metric] for r in rows
                            if r["config"] == config and r["ir"] == ir]
                    ys.append(sum(vals) / len(vals))
                ax.plot(irs, ys, marker="o", label=config)
            ax.set_xlabel("imbalance ratio")
            ax.set_ylabel(metric)
        axes[0].legend()
        return _save(fig, out_path)


def plot_sensitivity(rows: list[dict], out_path) -> Path:
    param = rows[0]["param"]
    values = [r["value"] for r in rows]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for metric in METRICS:
            ax.plot(values, [r[metric] for r in rows], marker="o", label=metric)
        ax.set_xlabel(param)
        ax.set_ylabel("score")
        ax.legend()
        return _save(fig, out_path)


def plot_ablation(rows: list[dict], out_path) -> Path:
    configs = [r["config"] for r in rows]
    x = range(len(configs))
    width = 0.25
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for i, metric in enumerate(METRICS):
            ax.bar([xi + (i - 1) * width for xi in x],
                   [r[metric] for r in rows], width=width, label=metric)
        ax.set_xticks(list(x))
        ax.set_xticklabels(configs)
        ax.set_ylim(0.0, 1.0)
        ax.legend()
        return _save(fig, out_path)


def plot_history(history: dict, out_path) -> Path:
    """Per-epoch loss curves from a training state's history."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        epochs = range(1, len(history["combined"]) + 1)
        for name in ("trans", "gnn", "cost", "combined"):
            ax.plot(epochs, history[name], label=name)
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend()
        return _save(fig, out_path)
