"""Mean-aggregation message-passing encoder with a manual backward pass.

Each layer averages a node's own embedding together with its sampled
neighbors' embeddings (equal weights, so an isolated node just keeps its
own row), applies a linear map, and gates through ReLU; the final layer
stays linear so downstream losses see signed logits. Gradients are
hand-derived: the adjoint of the mean scatter-gathers each node's
gradient back to itself and its sources with weight 1/(degree + 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .sampler import SampledGraph


@dataclass
class GnnParams:
    """Per-layer weight matrices (and optional biases)."""

    weights: list       # layer l maps dims[l] -> dims[l + 1]
    biases: list | None = None

    @classmethod
    def init(cls, feature_dim: int, hidden_dim: int, num_classes: int,
             num_layers: int, seed: int, stream_base: int = 1,
             use_bias: bool = False) -> "GnnParams":
        if num_layers < 1:
            raise ValueError("need at least one layer")
        dims = [feature_dim] + [hidden_dim] * (num_layers - 1) + [num_classes]
        weights = [
            kernels.init_uniform(dims[l], dims[l + 1], dims[l], seed, stream_base + l)
            for l in range(num_layers)
        ]
        biases = [np.zeros(dims[l + 1]) for l in range(num_layers)] if use_bias else None
        return cls(weights=weights, biases=biases)

    @property
    def num_layers(self) -> int:
        return len(self.weights)


@dataclass
class ForwardCache:
    """Everything backward() needs from the matching forward() call."""

    adjacency: sp.csr_matrix
    adjacency_t: sp.csr_matrix
    inv_counts: np.ndarray            # 1 / (kept degree + 1), per node
    aggregated: list = field(default_factory=list)   # mean-pooled layer inputs
    gates: list = field(default_factory=list)        # ReLU masks, hidden layers only
    weights: list = field(default_factory=list)
    use_bias: bool = False


def _operator(sg: SampledGraph) -> tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray]:
    n = sg.num_nodes
    data = np.ones(len(sg.indices), dtype=np.float64)
    adj = sp.csr_matrix((data, sg.indices, sg.indptr), shape=(n, n))
    inv = 1.0 / (sg.degrees() + 1.0)
    return adj, adj.T.tocsr(), inv


def forward(params: GnnParams, sg: SampledGraph, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Logits z (one row per node) plus the cache for backward()."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != sg.num_nodes:
        raise kernels.ShapeError(
            f"feature rows {x.shape[0]} != num_nodes {sg.num_nodes}")
    adj, adj_t, inv = _operator(sg)
    cache = ForwardCache(adjacency=adj, adjacency_t=adj_t, inv_counts=inv,
                         weights=list(params.weights),
                         use_bias=params.biases is not None)
    h = x
    num_layers = params.num_layers
    for l, w in enumerate(params.weights):
        if h.shape[1] != w.shape[0]:
            raise kernels.ShapeError(
                f"layer {l}: input dim {h.shape[1]} != weight rows {w.shape[0]}")
        pooled = (h + adj @ h) * inv[:, None]
        cache.aggregated.append(pooled)
        pre = pooled @ w
        if params.biases is not None:
            pre = pre + params.biases[l]
        if l < num_layers - 1:
            cache.gates.append(pre > 0)
            h = np.maximum(pre, 0.0)
        else:
            h = pre  # final layer linear: unconstrained logits
    return h, cache


def backward(cache: ForwardCache, grad_z: np.ndarray) -> tuple[list, list | None]:
    """Gradients for every layer weight (and bias) via reverse traversal."""
    num_layers = len(cache.weights)
    if grad_z.shape[1] != cache.weights[-1].shape[1]:
        raise kernels.ShapeError("grad_z width does not match the final layer")
    grad_w = [None] * num_layers
    grad_b = [None] * num_layers if cache.use_bias else None
    d_pre = np.asarray(grad_z, dtype=np.float64)
    for l in range(num_layers - 1, -1, -1):
        grad_w[l] = cache.aggregated[l].T @ d_pre
        if cache.use_bias:
            grad_b[l] = d_pre.sum(axis=0)
        if l == 0:
            break
        d_pooled = d_pre @ cache.weights[l].T
        scaled = d_pooled * cache.inv_counts[:, None]
        d_h = scaled + cache.adjacency_t @ scaled
        d_pre = d_h * cache.gates[l - 1]
    return grad_w, grad_b
