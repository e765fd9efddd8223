import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgefl.errors import EmptyDataset, ShapeMismatch
from edgefl.partition import generate_blobs
from edgefl.trainer import (
    Dataset,
    ModelSpec,
    TrainConfig,
    evaluate,
    init_weights,
    loss_and_grad,
    node_training,
    predict,
)
from edgefl.weights import WeightSet

from oracles import argmax_loop, central_differences, gradient_instances, relative_error


def params_to_ws(params):
    entries = []
    for i in range(len(params) // 2):
        entries.append((f"W{i}", params[2 * i]))
        entries.append((f"b{i}", params[2 * i + 1]))
    return WeightSet(tuple(entries))


def test_init_softmax_layout():
    w = init_weights(ModelSpec("softmax_linear", 4, 3))
    assert w.layout == [("W0", (4, 3)), ("b0", (3,))]
    assert not w["b0"].any()
    assert w.version == 0


def test_init_mlp_within_glorot_bound():
    w = init_weights(ModelSpec("mlp", 4, 3, hidden_dims=(8,)))
    assert w.layout == [("W0", (4, 8)), ("b0", (8,)), ("W1", (8, 3)), ("b1", (3,))]
    assert np.abs(w["W0"]).max() < math.sqrt(6 / 12)
    assert np.abs(w["W1"]).max() < math.sqrt(6 / 11)


def test_init_deterministic():
    spec = ModelSpec("mlp", 5, 4, hidden_dims=(6, 3), init_seed=42)
    assert init_weights(spec) == init_weights(spec)
    assert not init_weights(spec).same_values(init_weights(ModelSpec("mlp", 5, 4, (6, 3), 43)))


def test_zero_model_loss_is_log_classes():
    w = WeightSet.from_arrays({"W0": np.zeros((4, 3)), "b0": np.zeros(3)})
    data = Dataset(np.random.default_rng(0).normal(size=(7, 4)), [0, 1, 2, 2, 1, 0, 0], 3)
    loss, _ = loss_and_grad(w, data)
    assert loss == pytest.approx(math.log(3), abs=1e-12)


def test_bias_gradient_closed_form():
    w = WeightSet.from_arrays({"W0": np.zeros((2, 2)), "b0": np.zeros(2)})
    _, grad = loss_and_grad(w, Dataset([[0.3, -1.0]], [0], 2))
    assert grad["b0"].tolist() == [-0.5, 0.5]


def test_single_sample_step_hand_computed():
    # logits = [0.7, 0.7] -> p = [0.5, 0.5]; y = 1 so p - onehot = [0.5, -0.5]
    # dW = x^T (p - onehot) = [[0.5, -0.5], [1, -1]], db = [0.5, -0.5]
    w = WeightSet.from_arrays({"W0": [[0.1, -0.2], [0.3, 0.4]], "b0": [0.0, 0.1]})
    out = node_training(w, Dataset([[1.0, 2.0]], [1], 2), TrainConfig(1, 1, 0.1, 0))
    assert np.allclose(out["W0"], [[0.05, -0.15], [0.2, 0.5]], atol=1e-7)
    assert np.allclose(out["b0"], [-0.05, 0.15], atol=1e-7)


def test_zero_learning_rate_is_identity():
    spec = ModelSpec("mlp", 3, 2, hidden_dims=(4,), init_seed=1)
    w = init_weights(spec).with_meta(version=5)
    data = generate_blobs(2, 20, 3, 2.0, seed=0)
    out = node_training(w, data, TrainConfig(7, 3, 0.0, 0))
    assert out.same_values(w)
    assert out.version == 6


def test_full_batch_step_matches_gradient():
    data = generate_blobs(3, 15, 4, 2.0, seed=3)
    w = init_weights(ModelSpec("mlp", 4, 3, hidden_dims=(5,), init_seed=2))
    _, grad = loss_and_grad(w, data)
    out = node_training(w, data, TrainConfig(len(data), 1, 0.3, 9))
    for name in w.names:
        expected = w[name].astype(np.float64) - 0.3 * grad[name].astype(np.float64)
        assert np.abs(out[name] - expected).max() <= 1e-6


def test_loss_invariant_to_sample_order():
    data = generate_blobs(3, 10, 4, 1.0, seed=5)
    w = init_weights(ModelSpec("mlp", 4, 3, hidden_dims=(6,), init_seed=0))
    perm = np.random.default_rng(1).permutation(len(data))
    a, _ = loss_and_grad(w, data)
    b, _ = loss_and_grad(w, data.subset(perm))
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("instance", gradient_instances(10, seed=123), ids=lambda i: i[0])
def test_gradient_matches_finite_differences(instance):
    kind, params, x, y, classes = instance
    _, grad = loss_and_grad(params_to_ws(params), Dataset(x, y, classes))
    numeric = central_differences(params, x.astype(np.float64), y)
    for name, fd in zip(grad.names, numeric):
        assert relative_error(grad[name], fd).max() <= 1e-4, name


def test_separable_blobs_reach_99_percent():
    data = generate_blobs(2, 100, 2, 8.0, seed=0)
    w = init_weights(ModelSpec("softmax_linear", 2, 2))
    out = node_training(w, data, TrainConfig(16, 50, 0.1, 0))
    assert evaluate(out, data) >= 0.99


def test_no_signal_stays_near_chance():
    train = generate_blobs(4, 100, 4, 0.0, seed=1)
    test = generate_blobs(4, 100, 4, 0.0, seed=2)
    w = node_training(init_weights(ModelSpec("softmax_linear", 4, 4)), train, TrainConfig(16, 5, 0.1, 0))
    assert abs(evaluate(w, test) - 0.25) <= 0.1


def test_training_is_deterministic():
    data = generate_blobs(3, 30, 5, 2.0, seed=4)
    w = init_weights(ModelSpec("mlp", 5, 3, hidden_dims=(4,)))
    cfg = TrainConfig(8, 3, 0.05, 11)
    assert node_training(w, data, cfg) == node_training(w, data, cfg)
    assert not node_training(w, data, cfg).same_values(node_training(w, data, TrainConfig(8, 3, 0.05, 12)))


def test_last_partial_batch_is_used():
    # 5 samples, B = 4: dropping the tail would leave sample 4 unseen
    x = np.zeros((5, 1), dtype=np.float32)
    x[4] = 1.0
    w = WeightSet.from_arrays({"W0": np.zeros((1, 2)), "b0": np.zeros(2)})
    out = node_training(w, Dataset(x, [0, 0, 0, 0, 1], 2), TrainConfig(4, 1, 1.0, 0))
    assert out["W0"][0, 1] > 0


def test_constant_logits_tie_to_lowest_class():
    w = WeightSet.from_arrays({"W0": np.zeros((3, 4)), "b0": [1.0, 1.0, 0.5, 1.0]})
    data = Dataset(np.random.default_rng(0).normal(size=(9, 3)), [0] * 9, 4)
    assert evaluate(w, data) == 1.0


def test_zero_model_accuracy_is_class0_fraction():
    rng = np.random.default_rng(7)
    labels = rng.integers(0, 2, size=50)
    w = WeightSet.from_arrays({"W0": np.zeros((2, 2)), "b0": np.zeros(2)})
    assert evaluate(w, Dataset(rng.normal(size=(50, 2)), labels, 2)) == np.mean(labels == 0)


def test_predict_matches_argmax_loop():
    rng = np.random.default_rng(8)
    w = init_weights(ModelSpec("mlp", 6, 5, hidden_dims=(7,), init_seed=3))
    x = rng.normal(size=(100, 6)).astype(np.float32)
    params = [w[n] for n in w.names]
    assert np.array_equal(predict(w, x), argmax_loop(params, x))


def test_shape_and_empty_errors():
    w = init_weights(ModelSpec("softmax_linear", 3, 2))
    with pytest.raises(ShapeMismatch):
        node_training(w, Dataset(np.zeros((2, 4)), [0, 1], 2), TrainConfig())
    with pytest.raises(ShapeMismatch):
        loss_and_grad(WeightSet.from_arrays({"W0": np.zeros((3, 2))}), Dataset(np.zeros((1, 3)), [0], 2))
    with pytest.raises(EmptyDataset):
        evaluate(w, Dataset(np.zeros((0, 3)), [], 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4))
def test_version_bumps_by_one(seed, version):
    w = init_weights(ModelSpec("softmax_linear", 2, 2, init_seed=seed)).with_meta(version=version)
    data = generate_blobs(2, 5, 2, 1.0, seed=seed)
    assert node_training(w, data, TrainConfig(3, 1, 0.1, seed)).version == version + 1
