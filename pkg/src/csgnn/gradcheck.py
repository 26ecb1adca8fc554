"""Finite-difference verification of every hand-derived gradient.

Two suites: the logit-gradient identity of the reweighted cross-entropy
(analytic p - onehot against central differences, across class counts),
and an end-to-end check that perturbs every parameter tensor of a small
two-module configuration with the sampled graph and cost matrix held
fixed, so the objective stays differentiable.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import kernels
from .cost import CostMatrix, loss_and_grad
from .encoder import backward, forward
from .graph import graph_from_pairs
from .sampler import sample_neighbors
from .trainer import TrainConfig, init_state
from .transform import embedding_probs, transform, transform_loss


def logit_gradient_max_error(seed: int = 0, instances: int = 100,
                             class_counts=(2, 3, 5)) -> float:
    """Max relative error of the analytic logit gradient over random cases."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        k = int(class_counts[i % len(class_counts)])
        n = int(rng.integers(2, 11))
        z = rng.normal(size=(n, k))
        cost = CostMatrix(values=rng.uniform(0.1, 3.0, size=(k, k)))
        labels = rng.integers(0, k, size=n)
        mask = np.ones(n, dtype=bool)

        _, grad = loss_and_grad(z, cost, labels, mask)
        numeric = kernels.finite_diff_grad(
            lambda zz: loss_and_grad(zz, cost, labels, mask)[0], z)
        worst = max(worst, kernels.relative_error(grad, numeric))
    return worst


def _tiny_graph(seed: int, n: int, feature_dim: int = 4):
    rng = np.random.default_rng(seed)
    pairs = np.array([(u, v) for u in range(n) for v in range(u + 1, n)
                      if rng.random() < 0.4], dtype=np.int64)
    features = rng.normal(size=(n, feature_dim))
    labels = rng.integers(0, 2, size=n)
    labels[:2] = [0, 1]
    g = graph_from_pairs(pairs, features, labels, num_classes=2)
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    # two nodes of each class for train, one of each for val
    for c in (0, 1):
        members = np.flatnonzero(labels == c)
        train[members[:2]] = True
        val[members[2:3]] = True
    return dataclasses.replace(g, train_mask=train, val_mask=val)


def end_to_end_errors(seed: int = 0, n: int = 10, layers: int = 2,
                      hidden_dim: int = 4) -> dict:
    """Relative errors per parameter tensor of one combined-loss step.

    Builds a small graph, runs the epoch's sampling once, then compares
    the analytic gradients of the combined objective with central
    differences of the same objective evaluated at perturbed tensors.
    """
    g = _tiny_graph(seed, n)
    cfg = TrainConfig(layers=layers, hidden_dim=hidden_dim, seed=seed,
                      epochs=1, use_bias=True)
    state = init_state(g, cfg)
    tp, gp, cost = state.transform_params, state.gnn_params, state.cost

    h = transform(tp, g.features)
    probs = embedding_probs(h)
    sg = sample_neighbors(g, probs, cfg.p_init)

    def combined_loss() -> float:
        l_trans, _, _ = transform_loss(tp, g.features, g.labels, g.train_mask)
        z, _ = forward(gp, sg, g.features)
        l_gnn, _ = loss_and_grad(z, cost, g.labels, g.train_mask)
        return l_gnn + cfg.trans_weight * l_trans

    l_trans, grad_tw, grad_tb = transform_loss(tp, g.features, g.labels, g.train_mask)
    z, cache = forward(gp, sg, g.features)
    _, grad_z = loss_and_grad(z, cost, g.labels, g.train_mask)
    grad_w, grad_b = backward(cache, grad_z)

    tensors = {"transform.weight": (tp.weight, cfg.trans_weight * grad_tw),
               "transform.bias": (tp.bias, cfg.trans_weight * grad_tb)}
    for l in range(gp.num_layers):
        tensors[f"gnn.weight{l}"] = (gp.weights[l], grad_w[l])
        tensors[f"gnn.bias{l}"] = (gp.biases[l], grad_b[l])

    errors = {}
    for name, (param, analytic) in tensors.items():
        original = param.copy()

        def objective(values, _param=param):
            _param[...] = values
            out = combined_loss()
            _param[...] = original
            return out

        numeric = kernels.finite_diff_grad(objective, original.copy(), h=1e-5)
        errors[name] = kernels.relative_error(analytic, numeric)
        param[...] = original
    return errors
