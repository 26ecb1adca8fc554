"""Bandit-controlled top-p neighbor sampling.

A two-action Bernoulli bandit nudges the sampling fraction p up or down
by a fixed step each epoch, rewarded by whether the average training-edge
similarity rose. Once the last window of rewards roughly cancels out the
controller freezes p for the rest of training. Sampling keeps, per node,
the ceil(p * degree) most similar neighbors (never fewer than one), so
message flow becomes directional: each node picks its own sources.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .transform import edge_similarities


@dataclass
class BanditState:
    """Mutable controller state; single writer is the training loop."""

    p: float = 0.5
    p_step: float = 0.02
    p_min: float = 0.05
    action_rule: str = "greedy"        # "greedy" or "eq9" (inverted mapping)
    window: int = 16
    rewards: deque = field(default=None)
    epoch: int = 0
    terminated: bool = False
    frozen_p: float | None = None
    prev_similarity: float | None = None
    last_reward: int | None = None

    def __post_init__(self):
        if not (0 < self.p_min <= self.p <= 1):
            raise ValueError("need 0 < p_min <= p <= 1")
        if self.action_rule not in ("greedy", "eq9"):
            raise ValueError(f"unknown action_rule {self.action_rule!r}")
        if self.rewards is None:
            self.rewards = deque(maxlen=self.window)

    def step(self, avg_similarity: float) -> int | None:
        """Advance one epoch on the observed average similarity.

        The first call only primes the comparison point and returns None.
        Later calls return the +1/-1 reward, move p by one step (clamped
        to [p_min, 1]) and, once a full reward window nearly cancels,
        terminate and freeze p.
        """
        if self.terminated:
            raise RuntimeError("bandit already terminated; p is frozen")
        self.epoch += 1
        if self.prev_similarity is None:
            self.prev_similarity = float(avg_similarity)
            return None
        rose = self.prev_similarity <= avg_similarity  # ties count as a rise
        reward = 1 if rose else -1
        if self.action_rule == "greedy":
            direction = reward
        else:
            # Literal state->action table: similarity fell or held -> raise p.
            direction = 1 if not (self.prev_similarity < avg_similarity) else -1
        self.p = float(min(1.0, max(self.p_min, self.p + direction * self.p_step)))
        self.rewards.append(reward)
        self.prev_similarity = float(avg_similarity)
        self.last_reward = reward
        if len(self.rewards) == self.window and abs(sum(self.rewards)) <= 2:
            self.terminated = True
            self.frozen_p = self.p
        return reward

    @property
    def effective_p(self) -> float:
        return self.frozen_p if self.terminated else self.p


@dataclass(frozen=True)
class SampledGraph:
    """Per-node kept-neighbor lists; directional, not re-symmetrized."""

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)


def full_sample(g: Graph) -> SampledGraph:
    """The identity sampling: every neighbor kept."""
    return SampledGraph(g.num_nodes, g.indptr, g.indices)


def average_similarity(probs: np.ndarray, g: Graph, train_mask: np.ndarray) -> float:
    """Mean similarity over edges with both endpoints in the train mask."""
    mask = np.asarray(train_mask, dtype=bool)
    rows = np.repeat(np.arange(g.num_nodes), g.degrees())
    cols = g.indices
    keep = (rows < cols) & mask[rows] & mask[cols]
    if not np.any(keep):
        raise ValueError(
            "training subgraph has no edges; enlarge the train fraction "
            "or regenerate the synthetic graph")
    sims = edge_similarities(probs, rows[keep], cols[keep])
    return float(sims.mean())


def sample_neighbors(g: Graph, probs: np.ndarray, p: float) -> SampledGraph:
    """Keep, per node, the max(1, ceil(p * degree)) most similar neighbors.

    Ties in similarity break toward the lower node id. Isolated nodes are
    left untouched. Kept lists stay sorted by node id.
    """
    if not (0 < p <= 1):
        raise ValueError("p must be in (0, 1]")
    deg = g.degrees()
    rows = np.repeat(np.arange(g.num_nodes), deg)
    cols = g.indices
    if len(cols) == 0:
        return SampledGraph(g.num_nodes, g.indptr.copy(), g.indices.copy())
    sims = edge_similarities(probs, rows, cols)
    # Group entries by row, then similarity descending, then id ascending.
    order = np.lexsort((cols, -sims, rows))
    keep_counts = np.maximum(1, np.ceil(p * deg).astype(np.int64))
    pos_in_row = np.arange(len(cols)) - g.indptr[rows[order]]
    kept = order[pos_in_row < keep_counts[rows[order]]]
    new_rows = rows[kept]
    new_cols = cols[kept]
    resort = np.lexsort((new_cols, new_rows))
    new_cols = new_cols[resort]
    counts = np.bincount(new_rows, minlength=g.num_nodes)
    indptr = np.zeros(g.num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return SampledGraph(g.num_nodes, indptr, new_cols.astype(np.int64))
