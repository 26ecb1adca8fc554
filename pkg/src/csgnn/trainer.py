"""Training orchestration: one full-batch pass per epoch.

Epoch order: (1) feature transform and its loss; (2) unless the sampler
is ablated, average training-edge similarity, one bandit step (skipped
once terminated) and top-p sampling; (3) encoder forward; (4) the
cost-reweighted cross-entropy (uniform weights when the cost module is
ablated); (5) combined loss = encoder loss + trans_weight * transform
loss; (6) one optimizer step on all network parameters; then, when the
cost module is active, the cost matrix takes its own descent step toward
the freshly built target. Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cost import CostMatrix, build_target, cost_softmax, init_cost, loss_and_grad, update_cost
from .encoder import GnnParams, backward, forward
from .graph import ClassStats, Graph, class_stats
from .metrics import MetricsReport, compute_metrics
from .sampler import BanditState, SampledGraph, average_similarity, full_sample, sample_neighbors
from .transform import TransformParams, embedding_probs, transform, transform_loss

ABLATIONS = ("full", "no_sampler", "no_cost", "vanilla")


@dataclass
class TrainConfig:
    epochs: int = 100
    layers: int = 2
    hidden_dim: int = 64
    lr: float = 0.1               # full-batch GD scale; use ~0.01 with adam
    cost_lr: float = 0.01
    trans_weight: float = 1.0      # weight of the transform loss in the objective
    beta: float = 1.0              # scale of the cost-matrix target
    p_step: float = 0.02           # bandit step applied to the sampling fraction
    p_init: float = 0.5
    p_min: float = 0.05
    action_rule: str = "greedy"
    bandit_window: int = 16
    seed: int = 0
    ablation: str = "full"
    optimizer: str = "gd"          # "gd" or "adam"
    use_bias: bool = False
    normalize_similarity: bool = True
    train_frac: float = 0.2        # used by split/harness paths, not by train() itself
    val_frac: float = 0.2

    def __post_init__(self):
        if self.epochs < 1 or self.layers < 1 or self.hidden_dim < 1:
            raise ValueError("epochs, layers and hidden_dim must be positive")
        if self.lr <= 0 or self.cost_lr <= 0 or self.p_step <= 0:
            raise ValueError("learning rates and p_step must be positive")
        if self.trans_weight < 0 or self.beta < 0:
            raise ValueError("trans_weight and beta must be nonnegative")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")
        if self.optimizer not in ("gd", "adam"):
            raise ValueError("optimizer must be 'gd' or 'adam'")
        if self.action_rule not in ("greedy", "eq9"):
            raise ValueError("action_rule must be 'greedy' or 'eq9'")

    @property
    def use_sampler(self) -> bool:
        return self.ablation in ("full", "no_cost")

    @property
    def use_cost(self) -> bool:
        return self.ablation in ("full", "no_sampler")


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    """Parse a flat ``key = value`` config file over the given defaults."""
    cfg = base or TrainConfig()
    types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    updates = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            updates[key] = _coerce(key, value)
    return replace(cfg, **updates)


def config_file_keys(path) -> set:
    """Keys a config file actually sets (for override precedence)."""
    keys = set()
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line and "=" in line:
                keys.add(line.split("=", 1)[0].strip())
    return keys


def _coerce(key: str, value: str):
    current = getattr(TrainConfig(), key)
    if isinstance(current, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key}: expected a boolean, got {value!r}")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


@dataclass
class TrainState:
    config: TrainConfig
    transform_params: TransformParams
    gnn_params: GnnParams
    cost: CostMatrix | None
    bandit: BanditState | None
    stats: ClassStats | None = None
    epoch: int = 0
    history: dict = field(default_factory=lambda: {
        "trans": [], "gnn": [], "cost": [], "combined": []})
    sampled: SampledGraph | None = None


class _GradientDescent:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list, grads: list) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: list, grads: list) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(cfg: TrainConfig):
    return _Adam(cfg.lr) if cfg.optimizer == "adam" else _GradientDescent(cfg.lr)


def init_state(g: Graph, cfg: TrainConfig) -> TrainState:
    tp = TransformParams.init(g.feature_dim, g.num_classes, cfg.seed,
                              stream=0, use_bias=cfg.use_bias)
    gp = GnnParams.init(g.feature_dim, cfg.hidden_dim, g.num_classes,
                        cfg.layers, cfg.seed, stream_base=1, use_bias=cfg.use_bias)
    stats = class_stats(g)
    cost = init_cost(stats, beta=cfg.beta, lr=cfg.cost_lr) if cfg.use_cost else None
    bandit = None
    if cfg.use_sampler:
        bandit = BanditState(p=cfg.p_init, p_step=cfg.p_step, p_min=cfg.p_min,
                             action_rule=cfg.action_rule, window=cfg.bandit_window)
    return TrainState(config=cfg, transform_params=tp, gnn_params=gp,
                      cost=cost, bandit=bandit, stats=stats)


def _collect_params(state: TrainState) -> list:
    params = [state.transform_params.weight]
    if state.transform_params.bias is not None:
        params.append(state.transform_params.bias)
    params.extend(state.gnn_params.weights)
    if state.gnn_params.biases is not None:
        params.extend(state.gnn_params.biases)
    return params


def train(g: Graph, cfg: TrainConfig, trace_dir=None) -> tuple[TrainState, MetricsReport]:
    """Run the full training loop; returns the state and validation metrics."""
    if not g.train_mask.any() or not g.val_mask.any():
        raise ValueError("graph needs non-empty train and val masks; call split_masks")
    state = init_state(g, cfg)
    optimizer = _make_optimizer(cfg)
    x, y = g.features, g.labels
    bandit_rows, cost_rows = [], []

    for epoch in range(1, cfg.epochs + 1):
        l_trans, grad_tw, grad_tb = transform_loss(
            state.transform_params, x, y, g.train_mask)

        if cfg.use_sampler:
            h = transform(state.transform_params, x)
            probs = embedding_probs(h, normalize=cfg.normalize_similarity)
            reward = None
            sim = None
            if not state.bandit.terminated:
                sim = average_similarity(probs, g, g.train_mask)
                reward = state.bandit.step(sim)
            sg = sample_neighbors(g, probs, state.bandit.effective_p)
            if trace_dir is not None:
                bandit_rows.append((epoch, sim, reward, state.bandit.effective_p))
        else:
            sg = full_sample(g)
        state.sampled = sg

        z, cache = forward(state.gnn_params, sg, x)
        l_gnn, grad_z = loss_and_grad(z, state.cost if cfg.use_cost else None,
                                      y, g.train_mask)
        combined = l_gnn + cfg.trans_weight * l_trans
        if not (np.isfinite(l_trans) and np.isfinite(l_gnn) and np.isfinite(combined)):
            raise RuntimeError(
                f"non-finite loss at epoch {epoch}: "
                f"trans={l_trans}, gnn={l_gnn}, combined={combined}")

        grad_w, grad_b = backward(cache, grad_z)
        params = _collect_params(state)
        grads = [cfg.trans_weight * grad_tw]
        if state.transform_params.bias is not None:
            grads.append(cfg.trans_weight * grad_tb)
        grads.extend(grad_w)
        if state.gnn_params.biases is not None:
            grads.extend(grad_b)
        optimizer.step(params, grads)

        if cfg.use_cost:
            build_target(z, state.cost, y, g.train_mask, state.stats)
            val_idx = np.flatnonzero(g.val_mask)
            val_err = float(np.mean(np.argmax(z[val_idx], axis=1) != y[val_idx]))
            l_cost = update_cost(state.cost, val_err)
            if trace_dir is not None:
                cost_rows.extend(_cost_trace_rows(epoch, state.cost))
        else:
            l_cost = 0.0

        state.epoch = epoch
        state.history["trans"].append(l_trans)
        state.history["gnn"].append(l_gnn)
        state.history["cost"].append(l_cost)
        state.history["combined"].append(combined)

    if trace_dir is not None:
        _write_traces(trace_dir, bandit_rows, cost_rows)
    report = evaluate(state, g, g.val_mask)
    return state, report


def predict(state: TrainState, g: Graph, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and probability rows for the masked nodes.

    Uses the trained pipeline: sampling at the frozen fraction ranked by
    the final transform (full adjacency when the sampler is ablated),
    encoder forward, then uniform-weight softmax. Ties in the argmax
    break toward the lowest class index.
    """
    cfg = state.config
    if cfg.use_sampler:
        h = transform(state.transform_params, g.features)
        probs = embedding_probs(h, normalize=cfg.normalize_similarity)
        sg = sample_neighbors(g, probs, state.bandit.effective_p)
    else:
        sg = full_sample(g)
    z, _ = forward(state.gnn_params, sg, g.features)
    scores = cost_softmax(z, None, None, mode="infer")
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    preds = np.argmax(scores[idx], axis=1)
    return preds, scores[idx]


def evaluate(state: TrainState, g: Graph, mask: np.ndarray) -> MetricsReport:
    preds, scores = predict(state, g, mask)
    return compute_metrics(g.labels[np.asarray(mask, dtype=bool)], preds, scores)


# ---------------------------------------------------------------------------
# Traces and checkpoints
# ---------------------------------------------------------------------------

_COST_PARTS = ("cost", "target", "prior", "scatter", "confusion")


def _cost_trace_rows(epoch: int, cost: CostMatrix) -> list:
    mats = {"cost": cost.values, "target": cost.target, "prior": cost.prior,
            "scatter": cost.scatter, "confusion": cost.confusion}
    rows = []
    for name in _COST_PARTS:
        m = mats[name]
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                rows.append((epoch, name, i, j, repr(float(m[i, j]))))
    return rows


def _write_traces(trace_dir, bandit_rows, cost_rows) -> None:
    out = Path(trace_dir)
    out.mkdir(parents=True, exist_ok=True)
    if bandit_rows:
        with open(out / "bandit_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "avg_similarity", "reward", "p"])
            for epoch, sim, reward, p in bandit_rows:
                w.writerow([epoch,
                            "" if sim is None else repr(sim),
                            "" if reward is None else reward,
                            repr(p)])
    if cost_rows:
        with open(out / "cost_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "matrix", "row", "col", "value"])
            w.writerows(cost_rows)


def state_tensors(state: TrainState) -> dict:
    """Flatten a trained state into named tensors for the checkpoint."""
    cfg = state.config
    tensors = {"transform.weight": state.transform_params.weight}
    if state.transform_params.bias is not None:
        tensors["transform.bias"] = state.transform_params.bias
    for l, w in enumerate(state.gnn_params.weights):
        tensors[f"gnn.weight{l}"] = w
    if state.gnn_params.biases is not None:
        for l, b in enumerate(state.gnn_params.biases):
            tensors[f"gnn.bias{l}"] = b
    if state.cost is not None:
        tensors["cost.values"] = state.cost.values
    tensors["meta.flags"] = np.array([
        float(cfg.use_sampler),
        float(cfg.use_cost),
        float(cfg.use_bias),
        float(cfg.normalize_similarity),
        float(cfg.layers),
        float(cfg.hidden_dim),
    ])
    if state.bandit is not None:
        tensors["meta.p"] = np.array([state.bandit.effective_p])
    return tensors


def state_from_tensors(tensors: dict, cfg: TrainConfig | None = None) -> TrainState:
    """Rebuild a predict-ready state from checkpoint tensors."""
    flags = tensors["meta.flags"].ravel()
    use_sampler, use_cost = bool(flags[0]), bool(flags[1])
    if use_sampler and use_cost:
        ablation = "full"
    elif use_sampler:
        ablation = "no_cost"
    elif use_cost:
        ablation = "no_sampler"
    else:
        ablation = "vanilla"
    base = cfg or TrainConfig()
    config = replace(base, ablation=ablation, use_bias=bool(flags[2]),
                     normalize_similarity=bool(flags[3]), layers=int(flags[4]),
                     hidden_dim=int(flags[5]))
    tw = tensors["transform.weight"]
    tb = tensors.get("transform.bias")
    tp = TransformParams(weight=tw, bias=None if tb is None else tb.ravel())
    weights = []
    l = 0
    while f"gnn.weight{l}" in tensors:
        weights.append(tensors[f"gnn.weight{l}"])
        l += 1
    biases = None
    if "gnn.bias0" in tensors:
        biases = [tensors[f"gnn.bias{i}"].ravel() for i in range(len(weights))]
    gp = GnnParams(weights=weights, biases=biases)
    cost = None
    if "cost.values" in tensors:
        cost = CostMatrix(values=tensors["cost.values"], beta=config.beta,
                          lr=config.cost_lr)
    bandit = None
    if use_sampler:
        p = float(tensors["meta.p"].ravel()[0])
        bandit = BanditState(p=p, p_step=config.p_step,
                             p_min=min(config.p_min, p), window=config.bandit_window)
        bandit.terminated = True
        bandit.frozen_p = p
    return TrainState(config=config, transform_params=tp, gnn_params=gp,
                      cost=cost, bandit=bandit)
