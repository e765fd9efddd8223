import numpy as np
import pytest

from edgefl.fedavg import FedAvgConfig, node_splits, run_fedavg
from edgefl.partition import PartitionPlan, generate_blobs, partition_uniform
from edgefl.trainer import ModelSpec, TrainConfig, init_weights, node_training
from edgefl.weights import average


@pytest.fixture(scope="module")
def data():
    return generate_blobs(3, 40, 5, 3.0, seed=0)


def config(data, plan, **kw):
    kw.setdefault("rounds", 3)
    return FedAvgConfig(
        node_count=plan.node_count, train=TrainConfig(8, 1, 0.1, 0),
        model=ModelSpec("softmax_linear", data.feature_dim, data.class_count, init_seed=2),
        plan=plan, seed=1, **kw,
    )


def test_single_client_is_local_sgd(data):
    plan = partition_uniform(data.labels, 3, 1, seed=0)
    cfg = config(data, plan, rounds=4)
    history = run_fedavg(cfg, data)
    train, _ = node_splits(data, plan, cfg.seed)[1]
    w = init_weights(cfg.model)
    for rnd in history:
        w = node_training(w, train, cfg.train)
        assert rnd.weights.same_values(w)


def test_identical_partitions_average_to_themselves(data):
    everything = list(range(len(data)))
    hist = np.tile(np.bincount(data.labels, minlength=3), (3, 1))
    plan = PartitionPlan("uniform", 3, [everything] * 3, 0, hist)
    # no hold-out, so all three clients train on exactly the same samples
    cfg = config(data, plan, test_fraction=0.0)
    history = run_fedavg(cfg, data)
    w = init_weights(cfg.model)
    for rnd in history:
        w = node_training(w, data, cfg.train)
        assert rnd.weights.same_values(w)
        assert rnd.local_accuracy == {}


def test_deterministic_and_convex(data):
    plan = partition_uniform(data.labels, 3, 4, seed=3)
    cfg = config(data, plan, rounds=2)
    a, b = run_fedavg(cfg, data), run_fedavg(cfg, data)
    for x, y in zip(a, b):
        assert x.weights.same_values(y.weights)
        assert x.local_accuracy == y.local_accuracy
    splits = node_splits(data, plan, cfg.seed)
    prev = init_weights(cfg.model)
    for rnd in a:
        locals_ = [node_training(prev, splits[k][0], cfg.train) for k in rnd.participants]
        for name in prev.names:
            stack = np.stack([u[name] for u in locals_])
            assert np.all(rnd.weights[name] >= stack.min(axis=0))
            assert np.all(rnd.weights[name] <= stack.max(axis=0))
        prev = rnd.weights


def test_client_fraction_samples_subset(data):
    plan = partition_uniform(data.labels, 3, 10, seed=0)
    history = run_fedavg(config(data, plan, client_fraction=0.3), data)
    for rnd in history:
        assert len(rnd.participants) == 3
        assert set(rnd.local_accuracy) == set(rnd.participants)
        assert len(rnd.global_accuracy) == 10


def test_weighted_average_uses_sample_counts(data):
    plan = PartitionPlan("uniform", 2, [list(range(0, 100)), list(range(100, 120))], 0,
                         np.zeros((2, 3), dtype=int))
    cfg = config(data, plan, rounds=1, weighting="weighted_average")
    history = run_fedavg(cfg, data)
    splits = node_splits(data, plan, cfg.seed)
    w0 = init_weights(cfg.model)
    u = [node_training(w0, splits[k][0], cfg.train) for k in (1, 2)]
    sizes = np.array([len(splits[k][0]) for k in (1, 2)], dtype=float)
    assert history[0].weights.same_values(average(u, sizes / sizes.sum()))


def test_config_validation(data):
    plan = partition_uniform(data.labels, 3, 2, seed=0)
    with pytest.raises(ValueError):
        config(data, plan, client_fraction=0)
    with pytest.raises(ValueError):
        config(data, plan, weighting="median")
    with pytest.raises(ValueError):
        FedAvgConfig(3, 1, TrainConfig(), ModelSpec("softmax_linear", 5, 3), plan)
