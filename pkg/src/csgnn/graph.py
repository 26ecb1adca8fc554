"""Graph data model, CSV ingestion, synthetic generation and splits.

A graph is an immutable node-attributed structure: symmetric CSR
adjacency (no self-loops, sorted neighbor lists), a dense feature matrix,
integer class labels and three disjoint boolean split masks.

File formats
------------
edges.csv     one ``src,dst`` integer pair per line, optional header,
              whitespace tolerated; an extra weight column is ignored
              with a warning.
features.csv  ``node_id,f1,...,fd``, header optional.
labels.csv    ``node_id,label`` with an integer class id.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class GraphFormatError(ValueError):
    """Malformed input file; message carries the offending line number."""


class GraphValidationError(ValueError):
    """Structurally invalid graph (dangling edge, bad label, ...)."""


@dataclass(frozen=True)
class Graph:
    """Immutable node-attributed graph with CSR adjacency."""

    num_nodes: int
    indptr: np.ndarray      # int64, length num_nodes + 1
    indices: np.ndarray     # int64, neighbor ids sorted within each row
    features: np.ndarray    # float64, num_nodes x feature_dim
    labels: np.ndarray      # int64 class ids in [0, num_classes)
    num_classes: int
    train_mask: np.ndarray = field(default=None)
    val_mask: np.ndarray = field(default=None)
    test_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.num_nodes
        for name in ("train_mask", "val_mask", "test_mask"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(n, dtype=bool))
        for name in ("indptr", "indices", "features", "labels",
                     "train_mask", "val_mask", "test_mask"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        validate_graph(self)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (half the stored entry count)."""
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


@dataclass(frozen=True)
class ClassStats:
    """Per-class counts, priors and the min/max imbalance ratio."""

    counts: np.ndarray
    priors: np.ndarray
    imbalance_ratio: float


def validate_graph(g: Graph) -> None:
    n = g.num_nodes
    if g.indptr.shape != (n + 1,) or g.indptr[0] != 0 or g.indptr[-1] != len(g.indices):
        raise GraphValidationError("indptr does not describe the index array")
    if np.any(np.diff(g.indptr) < 0):
        raise GraphValidationError("indptr must be non-decreasing")
    if len(g.indices) and (g.indices.min() < 0 or g.indices.max() >= n):
        raise GraphValidationError("neighbor id out of range")
    if g.features.shape[0] != n:
        raise GraphValidationError(
            f"feature matrix has {g.features.shape[0]} rows for {n} nodes")
    if g.labels.shape != (n,):
        raise GraphValidationError("labels must be one id per node")
    if g.num_classes < 2:
        raise GraphValidationError("need at least two classes")
    if n and (g.labels.min() < 0 or g.labels.max() >= g.num_classes):
        raise GraphValidationError("label id outside [0, num_classes)")
    for v in range(n):
        row = g.indices[g.indptr[v]:g.indptr[v + 1]]
        if len(row) == 0:
            continue
        if np.any(np.diff(row) <= 0):
            raise GraphValidationError(f"row {v}: neighbors not strictly increasing")
        if np.any(row == v):
            raise GraphValidationError(f"row {v}: self-loop stored")
    if not _is_symmetric(g.indptr, g.indices, n):
        raise GraphValidationError("adjacency is not symmetric")
    overlap = (g.train_mask & g.val_mask) | (g.train_mask & g.test_mask) | (g.val_mask & g.test_mask)
    if np.any(overlap):
        raise GraphValidationError("split masks overlap")


def _is_symmetric(indptr, indices, n) -> bool:
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    fwd = set(zip(rows.tolist(), indices.tolist()))
    return all((v, u) in fwd for (u, v) in fwd)


def _csr_from_pairs(pairs: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric CSR from raw (src, dst) pairs; dedups, drops self-loops."""
    if len(pairs) == 0:
        return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    both = np.concatenate([pairs, pairs[:, ::-1]])
    both = both[both[:, 0] != both[:, 1]]
    if len(both) == 0:
        return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    both = np.unique(both, axis=0)  # sorts by (row, col) and dedups
    counts = np.bincount(both[:, 0], minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, both[:, 1].astype(np.int64)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _read_rows(path) -> list[tuple[int, list[str]]]:
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if cells:
                out.append((lineno, cells))
    return out


def _is_header(cells: list[str]) -> bool:
    try:
        float(cells[0])
        return False
    except ValueError:
        return True


def load_graph(edge_path, feature_path, label_path) -> Graph:
    """Build a validated Graph from the three CSV files.

    Node ids need not be contiguous; they are remapped to 0..N-1 in
    ascending id order. Duplicate edges are deduplicated and directed
    input is symmetrized. Classes must be the contiguous range 0..K-1.
    """
    label_rows = _read_rows(label_path)
    if label_rows and _is_header(label_rows[0][1]):
        label_rows = label_rows[1:]
    ids, labels = [], []
    for lineno, cells in label_rows:
        if len(cells) != 2:
            raise GraphFormatError(f"{label_path}:{lineno}: expected node_id,label")
        try:
            ids.append(int(cells[0]))
            labels.append(int(cells[1]))
        except ValueError as exc:
            raise GraphFormatError(f"{label_path}:{lineno}: {exc}") from None
    if not ids:
        raise GraphFormatError(f"{label_path}: no label rows")
    order = np.argsort(np.asarray(ids, dtype=np.int64), kind="stable")
    node_ids = np.asarray(ids, dtype=np.int64)[order]
    if len(np.unique(node_ids)) != len(node_ids):
        raise GraphValidationError("duplicate node id in label file")
    remap = {int(nid): i for i, nid in enumerate(node_ids)}
    y = np.asarray(labels, dtype=np.int64)[order]

    classes = np.unique(y)
    k = len(classes)
    if y.min() < 0 or y.max() >= k:
        raise GraphValidationError(
            f"label id {int(y.max())} >= num_classes {k}; classes must be 0..K-1")

    n = len(node_ids)
    feat_rows = _read_rows(feature_path)
    if feat_rows and _is_header(feat_rows[0][1]):
        feat_rows = feat_rows[1:]
    if len(feat_rows) != n:
        raise GraphValidationError(
            f"{feature_path}: {len(feat_rows)} feature rows for {n} labeled nodes")
    dim = len(feat_rows[0][1]) - 1
    if dim < 1:
        raise GraphFormatError(f"{feature_path}:{feat_rows[0][0]}: no feature columns")
    features = np.zeros((n, dim), dtype=np.float64)
    seen = np.zeros(n, dtype=bool)
    for lineno, cells in feat_rows:
        if len(cells) != dim + 1:
            raise GraphFormatError(
                f"{feature_path}:{lineno}: expected {dim + 1} columns, got {len(cells)}")
        try:
            nid = int(cells[0])
            vals = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise GraphFormatError(f"{feature_path}:{lineno}: {exc}") from None
        if nid not in remap:
            raise GraphValidationError(f"{feature_path}:{lineno}: unknown node id {nid}")
        features[remap[nid]] = vals
        seen[remap[nid]] = True
    if not seen.all():
        missing = int(node_ids[np.flatnonzero(~seen)[0]])
        raise GraphValidationError(f"{feature_path}: node {missing} has no feature row")

    edge_rows = _read_rows(edge_path)
    if edge_rows and _is_header(edge_rows[0][1]):
        edge_rows = edge_rows[1:]
    warned_weights = False
    pairs = np.zeros((len(edge_rows), 2), dtype=np.int64)
    for i, (lineno, cells) in enumerate(edge_rows):
        if len(cells) not in (2, 3):
            raise GraphFormatError(f"{edge_path}:{lineno}: expected src,dst")
        if len(cells) == 3 and not warned_weights:
            warnings.warn(f"{edge_path}: weight column ignored; edges treated as unweighted")
            warned_weights = True
        try:
            src, dst = int(cells[0]), int(cells[1])
        except ValueError as exc:
            raise GraphFormatError(f"{edge_path}:{lineno}: {exc}") from None
        if src not in remap or dst not in remap:
            bad = src if src not in remap else dst
            raise GraphValidationError(f"{edge_path}:{lineno}: dangling endpoint {bad}")
        pairs[i] = (remap[src], remap[dst])

    indptr, indices = _csr_from_pairs(pairs, n)
    return Graph(n, indptr, indices, features, y, k)


def graph_from_pairs(pairs, features, labels, num_classes: int | None = None) -> Graph:
    """Convenience constructor from raw (src, dst) pairs.

    Symmetrizes, deduplicates and drops self-loops, like the CSV loader.
    """
    labels = np.asarray(labels, dtype=np.int64)
    features = np.asarray(features, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    indptr, indices = _csr_from_pairs(pairs, len(labels))
    return Graph(len(labels), indptr, indices, features, labels, k)


def save_graph(g: Graph, out_dir) -> None:
    """Export a graph to edges.csv / features.csv / labels.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        rows = np.repeat(np.arange(g.num_nodes), g.degrees())
        for u, v in zip(rows.tolist(), g.indices.tolist()):
            if u < v:  # write each undirected edge once
                w.writerow([u, v])
    with open(out / "features.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id"] + [f"f{i}" for i in range(g.feature_dim)])
        for v in range(g.num_nodes):
            w.writerow([v] + [repr(x) for x in g.features[v].tolist()])
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "label"])
        for v in range(g.num_nodes):
            w.writerow([v, int(g.labels[v])])


# ---------------------------------------------------------------------------
# Statistics and splits
# ---------------------------------------------------------------------------

def class_stats(g: Graph, mask: np.ndarray | None = None) -> ClassStats:
    """Counts, priors and imbalance ratio over the selected nodes.

    The imbalance ratio is min(counts)/max(counts), in (0, 1]. Raises if
    any class is absent from the selection, naming the class.
    """
    y = g.labels if mask is None else g.labels[np.asarray(mask, dtype=bool)]
    counts = np.bincount(y, minlength=g.num_classes).astype(np.int64)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {missing} has no nodes in the selected mask")
    priors = counts / counts.sum()
    ir = float(counts.min() / counts.max())
    return ClassStats(counts=counts, priors=priors, imbalance_ratio=ir)


def split_masks(g: Graph, train_frac: float, val_frac: float, seed: int) -> Graph:
    """Stratified train/val/test masks, deterministic per seed.

    Per class: floor(train_frac * count) nodes go to train,
    floor(val_frac * count) to val, the remainder to test, so every
    split's class proportions match the full graph within one node.
    Note the floor rule plus train_frac + val_frac < 1 guarantees at
    least one test node per class.
    """
    if train_frac <= 0 or val_frac <= 0 or train_frac + val_frac >= 1:
        raise ValueError("need 0 < train_frac, 0 < val_frac, train_frac + val_frac < 1")
    rng = np.random.default_rng(seed)
    train = np.zeros(g.num_nodes, dtype=bool)
    val = np.zeros(g.num_nodes, dtype=bool)
    test = np.zeros(g.num_nodes, dtype=bool)
    for c in range(g.num_classes):
        members = np.flatnonzero(g.labels == c)
        rng.shuffle(members)
        n_train = int(math.floor(train_frac * len(members)))
        n_val = int(math.floor(val_frac * len(members)))
        if n_train == 0 or n_val == 0:
            raise ValueError(f"class {c} too small to appear in every split")
        train[members[:n_train]] = True
        val[members[n_train:n_train + n_val]] = True
        test[members[n_train + n_val:]] = True
    return replace(g, train_mask=train, val_mask=val, test_mask=test)


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

def _class_sizes(n: int, k: int, ir: float) -> np.ndarray:
    # Geometric interpolation between the largest and smallest class so
    # that realized min/max tracks the requested ratio.
    weights = ir ** (np.arange(k) / max(k - 1, 1))
    sizes = np.rint(n * weights / weights.sum()).astype(np.int64)
    sizes[0] += n - sizes.sum()  # absorb rounding drift in the largest class
    if np.any(sizes <= 0):
        raise ValueError(f"ir={ir} demands an empty class for n={n}, k={k}")
    return sizes


def generate_synthetic(
    n: int,
    k: int,
    ir: float,
    homophily: float,
    feature_dim: int,
    class_separation: float,
    seed: int,
    avg_degree: float = 20.0,
) -> Graph:
    """Planted-partition graph with class-conditional Gaussian features.

    Intra-class pairs connect at rate homophily * base and inter-class
    pairs at (1 - homophily) * base, with base solved so the expected
    mean degree is avg_degree. Class means sit class_separation apart in
    feature space with unit-variance noise. Deterministic per seed.
    """
    if not (0 < ir <= 1):
        raise ValueError("ir must be in (0, 1]")
    if not (0 <= homophily <= 1):
        raise ValueError("homophily must be in [0, 1]")
    if n < 10 * k:
        raise ValueError("need n >= 10k for a usable partition")
    sizes = _class_sizes(n, k, ir)
    realized = float(sizes.min() / sizes.max())
    if abs(realized - ir) > 0.02:
        raise ValueError(f"cannot realize ir={ir} within 0.02 (got {realized:.4f})")

    labels = np.repeat(np.arange(k, dtype=np.int64), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)])

    intra_pairs = float(np.sum(sizes * (sizes - 1) // 2))
    inter_pairs = float(sum(sizes[i] * sizes[j] for i in range(k) for j in range(i + 1, k)))
    target_edges = n * avg_degree / 2.0
    denom = homophily * intra_pairs + (1.0 - homophily) * inter_pairs
    base = target_edges / max(denom, 1.0)
    p_in = min(homophily * base, 1.0)
    p_out = min((1.0 - homophily) * base, 1.0)

    rng = np.random.default_rng(seed)
    chunks = []
    for i in range(k):
        for j in range(i, k):
            rate = p_in if i == j else p_out
            if rate <= 0:
                continue
            if i == j:
                m = int(sizes[i]) * (int(sizes[i]) - 1) // 2
            else:
                m = int(sizes[i]) * int(sizes[j])
            count = rng.binomial(m, rate)
            if count == 0:
                continue
            picks = rng.choice(m, size=count, replace=False)
            picks.sort()
            if i == j:
                u, v = _decode_triangular(picks, int(sizes[i]))
            else:
                u, v = picks // int(sizes[j]), picks % int(sizes[j])
            chunks.append(np.stack([u + starts[i], v + starts[j]], axis=1))
    pairs = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    indptr, indices = _csr_from_pairs(pairs.astype(np.int64), n)

    means = np.zeros((k, feature_dim))
    for c in range(k):
        means[c, c % feature_dim] = class_separation / np.sqrt(2.0)
    features = rng.standard_normal((n, feature_dim)) + means[labels]
    return Graph(n, indptr, indices, features, labels, k)


def _decode_triangular(idx: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map flat indices over {(u,v): u < v < n} back to pairs."""
    # Row u owns (n-1-u) pairs; invert the cumulative count with a search.
    row_starts = np.cumsum(np.concatenate([[0], np.arange(n - 1, 0, -1)]))
    u = np.searchsorted(row_starts, idx, side="right") - 1
    v = idx - row_starts[u] + u + 1
    return u, v
