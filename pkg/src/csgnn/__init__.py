"""Cost-sensitive graph neural network for imbalanced node classification.

The pipeline couples two imbalance treatments around a plain
mean-aggregation message-passing encoder: a bandit-tuned top-p neighbor
sampler that keeps, per node, the most similar fraction of neighbors
under a learned feature transform, and a cost-reweighted softmax head
whose K x K cost matrix descends toward a target rebuilt every epoch
from class priors, embedding scatter and confusion counts.
"""

from .cost import CostMatrix, calibration_check, cost_softmax, init_cost
from .graph import (ClassStats, Graph, class_stats, generate_synthetic,
                    graph_from_pairs, load_graph, save_graph, split_masks)
from .harness import SyntheticSpec, ablation_run, ir_sweep, sensitivity_sweep
from .metrics import MetricsReport, compute_metrics
from .sampler import BanditState, SampledGraph, sample_neighbors
from .trainer import TrainConfig, TrainState, evaluate, load_config, predict, train

__version__ = "0.1.0"

__all__ = [
    "BanditState",
    "ClassStats",
    "CostMatrix",
    "Graph",
    "MetricsReport",
    "SampledGraph",
    "SyntheticSpec",
    "TrainConfig",
    "TrainState",
    "ablation_run",
    "calibration_check",
    "class_stats",
    "compute_metrics",
    "cost_softmax",
    "evaluate",
    "generate_synthetic",
    "graph_from_pairs",
    "init_cost",
    "ir_sweep",
    "load_config",
    "load_graph",
    "predict",
    "sample_neighbors",
    "save_graph",
    "sensitivity_sweep",
    "split_masks",
    "train",
]
