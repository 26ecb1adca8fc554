"""Classification metrics for imbalanced node classification.

Macro recall averages per-class recalls with equal weight; the G-mean is
the K-th root of their product, so neglecting any single class drags it
to zero; macro AUC averages one-vs-rest ROC AUCs computed by the rank
statistic with ties counted half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    per_class_recall: np.ndarray
    macro_recall: float
    macro_auc: float
    g_mean: float
    confusion: np.ndarray          # counts, true class by predicted class

    def to_dict(self) -> dict:
        return {
            "per_class_recall": [float(r) for r in self.per_class_recall],
            "macro_recall": self.macro_recall,
            "macro_auc": self.macro_auc,
            "g_mean": self.g_mean,
            "confusion": self.confusion.astype(int).tolist(),
        }


def _midranks(x: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties assigned the mean rank of their group."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sx = x[order]
    i = 0
    while i < len(sx):
        j = i
        while j + 1 < len(sx) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(pos: np.ndarray, scores: np.ndarray) -> float:
    """One-vs-rest ROC AUC by the rank statistic, ties counted 0.5."""
    pos = np.asarray(pos, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = _midranks(np.asarray(scores, dtype=np.float64))
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(y_true: np.ndarray, y_pred: np.ndarray,
                    y_score: np.ndarray) -> MetricsReport:
    """Per-class recalls, macro recall, G-mean and macro AUC.

    y_score holds one probability row per sample. Raises if any class has
    zero support, naming the class.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    y_score = np.asarray(y_score, dtype=np.float64)
    if len(y_true) != len(y_pred) or len(y_true) != y_score.shape[0]:
        raise ValueError("length mismatch between labels, predictions and scores")
    k = y_score.shape[1]
    support = np.bincount(y_true, minlength=k)
    if np.any(support == 0):
        missing = int(np.flatnonzero(support == 0)[0])
        raise ValueError(f"class {missing} has zero support")
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    recalls = np.diag(confusion) / support
    macro_recall = float(recalls.mean())
    g_mean = float(np.prod(recalls) ** (1.0 / k))
    aucs = [roc_auc(y_true == c, y_score[:, c]) for c in range(k)]
    macro_auc = float(np.mean(aucs))
    return MetricsReport(per_class_recall=recalls.astype(np.float64),
                         macro_recall=macro_recall,
                         macro_auc=macro_auc,
                         g_mean=g_mean,
                         confusion=confusion)
