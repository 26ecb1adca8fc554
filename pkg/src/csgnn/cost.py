"""Cost-reweighted output layer and the self-tuning cost matrix.

The output probabilities weight each class exponential by the entry of a
K x K nonnegative cost matrix, indexed during training by the node's true
class row (inference falls back to uniform weights, i.e. plain softmax).
The matrix itself descends toward a moving target assembled from three
ingredients measured on the training nodes each epoch: class priors,
within/between-class scatter of the logits, and the normalised confusion
counts. Its initial value encodes the pairwise class-count ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import EPS
from .graph import ClassStats


class CalibrationError(RuntimeError):
    """Stationarity check failed; message carries the residual."""


@dataclass
class CostMatrix:
    """K x K nonnegative cost values plus target and its components."""

    values: np.ndarray
    beta: float = 1.0
    lr: float = 0.01
    target: np.ndarray | None = None
    prior: np.ndarray | None = None       # pairwise-max class priors
    scatter: np.ndarray | None = None     # within/between scatter ratios
    confusion: np.ndarray | None = None   # confusion counts / |mask|

    @property
    def num_classes(self) -> int:
        return self.values.shape[0]


def init_cost(stats: ClassStats, beta: float = 1.0, lr: float = 0.01) -> CostMatrix:
    """Initial cost entries ln(count_j / count_i + 1); diagonal ln 2."""
    counts = np.asarray(stats.counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("every class needs a positive count")
    values = np.log(counts[None, :] / counts[:, None] + 1.0)
    return CostMatrix(values=values, beta=beta, lr=lr)


def _weight_rows(cost: CostMatrix | None, labels: np.ndarray, n: int, k: int,
                 mode: str) -> np.ndarray:
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "infer" or cost is None:
        return np.ones((n, k))
    if labels is None:
        raise ValueError("train mode needs labels for the scored nodes")
    return cost.values[np.asarray(labels, dtype=np.int64)]


def cost_softmax(z: np.ndarray, cost: CostMatrix | None, labels: np.ndarray | None,
                 mode: str = "train") -> np.ndarray:
    """Probability rows with cost-reweighted exponentials.

    Train mode weights node v's exponentials by the cost row of its true
    class; infer mode (or cost=None) uses uniform weights and reduces to
    the plain row softmax. Rows are invariant to positive rescaling of a
    weight row.
    """
    z = np.asarray(z, dtype=np.float64)
    w = _weight_rows(cost, labels, z.shape[0], z.shape[1], mode)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    e = e * w
    denom = e.sum(axis=-1, keepdims=True)
    if np.any(denom <= 0):
        raise FloatingPointError("a cost row sums to zero; probabilities undefined")
    return e / denom


def loss_and_grad(z: np.ndarray, cost: CostMatrix | None, labels: np.ndarray,
                  mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cost-sensitive cross-entropy and its exact logit gradient.

    The gradient rows are (p_v - onehot(y_v)) / |mask| regardless of the
    cost values: reweighting the exponentials leaves the softmax Jacobian
    structure untouched, so backpropagation is unchanged.
    """
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if len(idx) == 0:
        raise ValueError("mask selects no nodes")
    y = np.asarray(labels, dtype=np.int64)[idx]
    p = cost_softmax(z[idx], cost, y, mode="train")
    picked = p[np.arange(len(idx)), y]
    loss = -float(np.mean(np.log(np.maximum(picked, 1e-300))))
    grad_rows = p.copy()
    grad_rows[np.arange(len(idx)), y] -= 1.0
    grad_rows /= len(idx)
    grad_z = np.zeros_like(np.asarray(z, dtype=np.float64))
    grad_z[idx] = grad_rows
    return loss, grad_z


def build_target(z: np.ndarray, cost: CostMatrix, labels: np.ndarray,
                 mask: np.ndarray, stats: ClassStats) -> np.ndarray:
    """Assemble the epoch's cost target from priors, scatter and confusion.

    All three components are K x K: pairwise-max priors; the ratio of
    summed within-class spread to between-mean distance per class pair
    (diagonal against the mean distance to the other classes); and the
    confusion counts of the train-mode predictions divided by the number
    of masked nodes. The target is their Hadamard product scaled by beta,
    and is stored on the cost matrix along with its components.
    """
    k = cost.num_classes
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if len(idx) == 0:
        raise ValueError("mask selects no nodes")
    y = np.asarray(labels, dtype=np.int64)[idx]
    emb = np.asarray(z, dtype=np.float64)[idx]

    h = np.asarray(stats.priors, dtype=np.float64)
    prior = np.maximum.outer(h, h)
    np.fill_diagonal(prior, h)

    means = np.zeros((k, emb.shape[1]))
    spread = np.zeros(k)
    for c in range(k):
        members = emb[y == c]
        if len(members) == 0:
            raise ValueError(f"class {c} has no nodes in the selected mask")
        means[c] = members.mean(axis=0)
        spread[c] = float(np.mean(np.sum((members - means[c]) ** 2, axis=1)))
    diff = means[:, None, :] - means[None, :, :]
    between = np.sum(diff * diff, axis=2)
    scatter = (spread[:, None] + spread[None, :]) / (between + EPS)
    off_mean = (between.sum(axis=1)) / max(k - 1, 1)  # diagonal of `between` is zero
    np.fill_diagonal(scatter, spread / (off_mean + EPS))

    p = cost_softmax(emb, cost, y, mode="train")
    preds = np.argmax(p, axis=1)
    confusion = np.zeros((k, k))
    np.add.at(confusion, (y, preds), 1.0)
    confusion /= len(idx)

    target = cost.beta * prior * scatter * confusion
    cost.target = target
    cost.prior = prior
    cost.scatter = scatter
    cost.confusion = confusion
    return target


def update_cost(cost: CostMatrix, val_error: float = 0.0) -> float:
    """One descent step of ||target - values||^2; returns the cost loss.

    The validation-error term is recorded in the returned loss for
    monitoring but contributes no gradient. Values are clamped
    nonnegative after the step.
    """
    if cost.target is None:
        raise ValueError("build_target must run before update_cost")
    diff = cost.values - cost.target
    loss = float(np.sum(diff * diff)) + float(val_error)
    cost.values = np.maximum(cost.values - cost.lr * 2.0 * diff, 0.0)
    return loss


# ---------------------------------------------------------------------------
# Stationarity check for the reweighted cross-entropy
# ---------------------------------------------------------------------------

def stationary_logit_map(logits: np.ndarray, cost_values: np.ndarray,
                         posteriors: np.ndarray) -> np.ndarray:
    """One fixed-point sweep of the optimal-logit equation.

    Rearranges the zero-gradient condition of the expected reweighted
    cross-entropy: z_m = log q_m - log(sum_y q_y C[y, m] / s_y) with
    s_y the cost-weighted exponential sums at the current logits.
    """
    s = np.exp(logits) @ cost_values.T
    denom = (posteriors / s) @ cost_values
    return np.log(posteriors) - np.log(denom)


def risk_gradient(logits: np.ndarray, cost_values: np.ndarray,
                  posteriors: np.ndarray) -> np.ndarray:
    """Gradient of the expected reweighted cross-entropy at the logits."""
    s = np.exp(logits) @ cost_values.T
    denom = (posteriors / s) @ cost_values
    return np.exp(logits) * denom - posteriors


def calibration_check(cost: CostMatrix | np.ndarray, posteriors: np.ndarray,
                      tol: float = 1e-8, max_iter: int = 200_000) -> np.ndarray:
    """Solve for the risk-minimising logits and verify stationarity.

    Iterates the fixed-point map (damped, mean-centred to pin down the
    shift degree of freedom) and raises CalibrationError with the residual
    if the expected-risk gradient at the solution is not below tol.
    Test utility only; returns the per-class optimal logits.
    """
    values = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    q = np.asarray(posteriors, dtype=np.float64)
    if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("posteriors must be positive and sum to 1")
    if np.any(values <= 0):
        raise ValueError("stationarity check needs strictly positive costs")
    z = np.zeros_like(q)
    for _ in range(max_iter):
        z_new = 0.5 * z + 0.5 * stationary_logit_map(z, values, q)
        z_new -= z_new.mean()
        if np.max(np.abs(z_new - z)) < 1e-14:
            z = z_new
            break
        z = z_new
    residual = float(np.max(np.abs(risk_gradient(z, values, q))))
    if residual >= tol:
        raise CalibrationError(
            f"risk gradient residual {residual:.3e} >= {tol:.1e} at the fixed point")
    return z
