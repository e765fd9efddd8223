"""Centralized FedAvg, run in-process as the comparison arm and oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .partition import PartitionPlan, local_split
from .trainer import Dataset, ModelSpec, TrainConfig, evaluate, init_weights, node_training
from .weights import WeightSet, average

WEIGHTINGS = ("uniform_average", "weighted_average")


@dataclass
class FedAvgConfig:
    node_count: int
    rounds: int
    train: TrainConfig
    model: ModelSpec
    plan: PartitionPlan
    seed: int = 0
    client_fraction: float = 1.0
    test_fraction: float = 0.2
    # uniform_average treats clients equally; weighted_average uses local train sizes
    weighting: str = "uniform_average"

    def __post_init__(self):
        if self.node_count != self.plan.node_count:
            raise ValueError("node_count must match the partition plan")
        if not 0 < self.client_fraction <= 1:
            raise ValueError("client_fraction must lie in (0, 1]")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")


@dataclass
class FedAvgRound:
    round: int
    weights: WeightSet
    participants: list[int]
    # accuracy of each participant's locally trained model on its own test split
    local_accuracy: dict[int, float] = field(default_factory=dict)
    # accuracy of the new global model on every node's test split
    global_accuracy: dict[int, float] = field(default_factory=dict)

    @property
    def mean_local_accuracy(self) -> float:
        return float(np.mean(list(self.local_accuracy.values())))

    @property
    def mean_global_accuracy(self) -> float:
        return float(np.mean(list(self.global_accuracy.values())))


def node_splits(data: Dataset, plan: PartitionPlan, seed: int,
                test_fraction: float = 0.2) -> dict[int, tuple[Dataset, Dataset]]:
    """Per-node (train, test) datasets, keyed by node id."""
    out = {}
    for node_id, indices in zip(plan.node_ids, plan.assignments):
        train_idx, test_idx = local_split(indices, seed, node_id, test_fraction)
        out[node_id] = (data.subset(train_idx), data.subset(test_idx))
    return out


def run_fedavg(cfg: FedAvgConfig, data: Dataset) -> list[FedAvgRound]:
    splits = node_splits(data, cfg.plan, cfg.seed, cfg.test_fraction)
    node_ids = list(cfg.plan.node_ids)
    rng = np.random.default_rng(cfg.seed)
    m = min(max(math.floor(len(node_ids) * cfg.client_fraction + 1e-9), 1), len(node_ids))

    w = init_weights(cfg.model)
    history = []
    for rnd in range(1, cfg.rounds + 1):
        if m == len(node_ids):
            chosen = node_ids
        else:
            chosen = sorted(node_ids[int(i)] for i in rng.choice(len(node_ids), m, replace=False))
        updates = []
        local_acc = {}
        for node_id in chosen:
            train, test = splits[node_id]
            local = node_training(w, train, cfg.train)
            updates.append(local)
            if len(test):
                local_acc[node_id] = evaluate(local, test)
        if cfg.weighting == "weighted_average":
            sizes = np.array([len(splits[k][0]) for k in chosen], dtype=np.float64)
            w = average(updates, sizes / sizes.sum())
        else:
            w = average(updates)
        w = w.with_meta(producer="fedavg-server")
        global_acc = {k: evaluate(w, splits[k][1]) for k in node_ids if len(splits[k][1])}
        history.append(FedAvgRound(rnd, w, list(chosen), local_acc, global_acc))
    return history
