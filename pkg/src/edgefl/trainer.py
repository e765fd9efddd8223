"""From-scratch models and the local mini-batch SGD loop.

Two model kinds are supported: a softmax-linear classifier and a ReLU MLP.
Both are stored as alternating ``W{i}`` / ``b{i}`` entries in a
:class:`~edgefl.weights.WeightSet`, so the architecture can be read back
from the weights alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, ShapeMismatch
from .weights import WeightSet

MODEL_KINDS = ("softmax_linear", "mlp")


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float32)
        if features.ndim == 1:
            features = features.reshape(-1, 1) if features.size else features.reshape(0, 0)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if features.shape[0] != labels.shape[0]:
            raise ValueError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_count)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    local_epochs: int = 1
    learning_rate: float = 0.1
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    feature_dim: int
    class_count: int
    hidden_dims: tuple[int, ...] = field(default=())
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.kind == "softmax_linear" and self.hidden_dims:
            raise ValueError("softmax_linear takes no hidden_dims")
        if self.kind == "mlp" and not self.hidden_dims:
            raise ValueError("mlp needs at least one hidden layer")
        if self.feature_dim < 1 or self.class_count < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("dimensions must be positive")

    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.feature_dim, *self.hidden_dims, self.class_count]
        return list(zip(sizes[:-1], sizes[1:]))

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        out = []
        for i, (fan_in, fan_out) in enumerate(self.layer_dims()):
            out.append((f"W{i}", (fan_in, fan_out)))
            out.append((f"b{i}", (fan_out,)))
        return out


def init_weights(spec: ModelSpec) -> WeightSet:
    """Glorot-uniform weight matrices and zero biases, seeded by ``spec.init_seed``."""
    rng = np.random.default_rng(spec.init_seed)
    entries = []
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims()):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)
        # float32 rounding may land on or past the open bound
        limit = np.float32(bound)
        if float(limit) >= bound:
            limit = np.nextafter(limit, np.float32(0))
        w = np.clip(w, -limit, limit)
        entries.append((f"W{i}", w))
        entries.append((f"b{i}", np.zeros(fan_out, dtype=np.float32)))
    return WeightSet(tuple(entries), version=0)


def _layers(w: WeightSet) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a WeightSet into (W, b) pairs, validating the chain of shapes."""
    entries = w.entries
    if not entries or len(entries) % 2:
        raise ShapeMismatch(f"expected alternating W/b entries, got {w.names}")
    layers = []
    prev_out = None
    for i in range(len(entries) // 2):
        (wn, wm), (bn, bv) = entries[2 * i], entries[2 * i + 1]
        if wn != f"W{i}" or bn != f"b{i}":
            raise ShapeMismatch(f"layer {i}: expected W{i}/b{i}, got {wn}/{bn}")
        if wm.ndim != 2 or bv.shape != (wm.shape[1],):
            raise ShapeMismatch(f"layer {i}: {wn}{list(wm.shape)} incompatible with {bn}{list(bv.shape)}")
        if prev_out is not None and wm.shape[0] != prev_out:
            raise ShapeMismatch(f"layer {i}: input dim {wm.shape[0]} != previous output {prev_out}")
        prev_out = wm.shape[1]
        layers.append((wm, bv))
    return layers


def _check_data(layers, data: Dataset) -> None:
    if len(data) == 0:
        raise EmptyDataset("dataset has no samples")
    if layers[0][0].shape[0] != data.feature_dim:
        raise ShapeMismatch(
            f"model expects {layers[0][0].shape[0]} features, data has {data.feature_dim}"
        )
    if layers[-1][0].shape[1] != data.class_count:
        raise ShapeMismatch(
            f"model has {layers[-1][0].shape[1]} outputs, data has {data.class_count} classes"
        )


def _logits(params: list[np.ndarray], x: np.ndarray) -> np.ndarray:
    h = x
    n_layers = len(params) // 2
    for i in range(n_layers):
        h = h @ params[2 * i] + params[2 * i + 1]
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def _loss_grad64(params: list[np.ndarray], x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient, all in float64."""
    n = x.shape[0]
    n_layers = len(params) // 2
    acts = [x]
    pre = []
    h = x
    for i in range(n_layers):
        z = h @ params[2 * i] + params[2 * i + 1]
        pre.append(z)
        h = np.maximum(z, 0.0) if i < n_layers - 1 else z
        acts.append(h)
    logits = acts[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    loss = -float(log_probs[np.arange(n), y].mean())

    delta = np.exp(log_probs)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads: list[np.ndarray] = [None] * len(params)
    for i in reversed(range(n_layers)):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params[2 * i].T) * (pre[i - 1] > 0)
    return loss, grads


def _as64(layers) -> list[np.ndarray]:
    out = []
    for wm, bv in layers:
        out.append(wm.astype(np.float64))
        out.append(bv.astype(np.float64))
    return out


def loss_and_grad(w: WeightSet, batch: Dataset) -> tuple[float, WeightSet]:
    layers = _layers(w)
    _check_data(layers, batch)
    loss, grads = _loss_grad64(
        _as64(layers), batch.features.astype(np.float64), batch.labels
    )
    grad = WeightSet(tuple((name, g) for name, g in zip(w.names, grads)), version=w.version)
    return loss, grad


def node_training(w: WeightSet, data: Dataset, cfg: TrainConfig) -> WeightSet:
    """Run ``cfg.local_epochs`` epochs of plain mini-batch SGD on ``data``.

    Each epoch reshuffles with seed ``shuffle_seed + epoch``; the last short
    batch is kept. Parameters are carried in float64 across steps and
    rounded to float32 once at the end.
    """
    layers = _layers(w)
    _check_data(layers, data)
    params = _as64(layers)
    x = data.features.astype(np.float64)
    y = data.labels
    n = len(data)
    for epoch in range(cfg.local_epochs):
        order = np.random.default_rng(cfg.shuffle_seed + epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = _loss_grad64(params, x[idx], y[idx])
            for p, g in zip(params, grads):
                p -= cfg.learning_rate * g
    entries = tuple((name, p.astype(np.float32)) for name, p in zip(w.names, params))
    return WeightSet(entries, version=w.version + 1, producer=w.producer)


def predict(w: WeightSet, features: np.ndarray) -> np.ndarray:
    layers = _layers(w)
    logits = _logits(_as64(layers), np.asarray(features, dtype=np.float64))
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(logits, axis=1)


def evaluate(w: WeightSet, data: Dataset) -> float:
    layers = _layers(w)
    _check_data(layers, data)
    return float(np.mean(predict(w, data.features) == data.labels))


def mean_loss(w: WeightSet, data: Dataset) -> float:
    return loss_and_grad(w, data)[0]
