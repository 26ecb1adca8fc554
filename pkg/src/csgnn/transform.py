"""Learned node-feature translator and the similarity it induces.

A single fully connected layer with ReLU maps raw features to
class-dimension embeddings. Node similarity is 1 minus the Euclidean
distance between (by default) the softmax-normalised embedding rows,
which bounds the similarity in [1 - sqrt(2), 1] and keeps it comparable
across epochs; the raw-embedding distance is available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class TransformParams:
    weight: np.ndarray                 # feature_dim x num_classes
    bias: np.ndarray | None = None     # num_classes, optional

    @classmethod
    def init(cls, feature_dim: int, num_classes: int, seed: int,
             stream: int = 0, use_bias: bool = False) -> "TransformParams":
        w = kernels.init_uniform(feature_dim, num_classes, feature_dim, seed, stream)
        b = np.zeros(num_classes) if use_bias else None
        return cls(weight=w, bias=b)


def transform(params: TransformParams, features: np.ndarray) -> np.ndarray:
    """Embedding rows relu(X W (+ b)), one per node."""
    pre = kernels.matmul(features, params.weight)
    if params.bias is not None:
        pre = pre + params.bias
    return kernels.relu(pre)


def embedding_probs(h: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Rows used for distances: row-softmax of h, or h itself if raw."""
    return kernels.softmax_rows(h) if normalize else np.asarray(h, dtype=np.float64)


def pair_similarity(h: np.ndarray, u: int, v: int, normalize: bool = True) -> float:
    """Similarity 1 - ||p_u - p_v||_2 between two embedding rows."""
    p = embedding_probs(h[[u, v]], normalize=normalize)
    return 1.0 - float(np.linalg.norm(p[0] - p[1]))


def edge_similarities(probs: np.ndarray, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Vectorised 1 - distance for many (u, v) pairs of prepared rows."""
    diff = probs[us] - probs[vs]
    return 1.0 - np.sqrt(np.sum(diff * diff, axis=1))


def transform_loss(
    params: TransformParams,
    features: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray | None]:
    """Mean cross-entropy of the embedding rows against the labels.

    Returns (loss, grad wrt weight, grad wrt bias or None). The gradient
    is analytic: softmax minus one-hot, gated through the ReLU, pulled
    back through the linear map.
    """
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise ValueError("mask selects no nodes")
    x = features[idx]
    pre = kernels.matmul(x, params.weight)
    if params.bias is not None:
        pre = pre + params.bias
    h = kernels.relu(pre)
    logp = kernels.log_softmax_rows(h)
    y = labels[idx]
    loss = -float(np.mean(logp[np.arange(len(idx)), y]))

    d_h = np.exp(logp)
    d_h[np.arange(len(idx)), y] -= 1.0
    d_h /= len(idx)
    d_pre = d_h * (pre > 0)
    grad_w = x.T @ d_pre
    grad_b = d_pre.sum(axis=0) if params.bias is not None else None
    return loss, grad_w, grad_b
