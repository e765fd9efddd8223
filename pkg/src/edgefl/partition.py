"""Dataset generation, IDX ingestion and node partitioning.

Two partition schemes are provided. ``partition_uniform`` deals every class
round-robin across nodes. ``partition_normal`` skews node ``k`` (1-based)
towards classes near ``mu_k = k * N / K`` with a Gaussian profile of width
``spread * N``.
"""

from __future__ import annotations

import gzip
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadLabel, BadMagic, CountMismatch, InsufficientSamples, Truncated
from .trainer import Dataset

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class PartitionPlan:
    scheme: str
    node_count: int
    assignments: list[list[int]]
    seed: int
    class_histogram: np.ndarray
    node_ids: list[int] = field(default_factory=list)
    # normal scheme only: per-node class requests before availability capping
    requested: np.ndarray | None = None

    def __post_init__(self):
        if not self.node_ids:
            self.node_ids = list(range(1, self.node_count + 1))
        if len(self.node_ids) != self.node_count or len(self.assignments) != self.node_count:
            raise ValueError("node_ids/assignments length must equal node_count")
        self.class_histogram = np.asarray(self.class_histogram, dtype=np.int64)

    def indices_for(self, node_id: int) -> list[int]:
        return self.assignments[self.node_ids.index(node_id)]

    def to_json(self) -> str:
        doc = {
            "scheme": self.scheme,
            "node_count": self.node_count,
            "seed": self.seed,
            "node_ids": self.node_ids,
            "assignments": [list(map(int, a)) for a in self.assignments],
            "class_histogram": self.class_histogram.tolist(),
        }
        if self.requested is not None:
            doc["requested"] = np.asarray(self.requested).tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "PartitionPlan":
        doc = json.loads(text)
        requested = doc.get("requested")
        return cls(
            scheme=doc["scheme"],
            node_count=doc["node_count"],
            assignments=doc["assignments"],
            seed=doc["seed"],
            class_histogram=np.asarray(doc["class_histogram"], dtype=np.int64),
            node_ids=doc.get("node_ids", []),
            requested=None if requested is None else np.asarray(requested, dtype=np.int64),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "PartitionPlan":
        return cls.from_json(Path(path).read_text())


def _check_labels(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        bad = int(labels[(labels < 0) | (labels >= n_classes)][0])
        raise BadLabel(f"label {bad} outside [0, {n_classes})")
    return labels


def _histogram(assignments, labels, n_classes) -> np.ndarray:
    hist = np.zeros((len(assignments), n_classes), dtype=np.int64)
    for k, idx in enumerate(assignments):
        if len(idx):
            hist[k] = np.bincount(labels[np.asarray(idx)], minlength=n_classes)
    return hist


def partition_uniform(labels, n_classes: int, n_nodes: int, seed: int) -> PartitionPlan:
    """Shuffle each class and deal it round-robin across nodes.

    The dealing position carries over from one class to the next, so node
    totals stay balanced as well as per-class counts.
    """
    if n_nodes < 1:
        raise ValueError("need at least one node")
    labels = _check_labels(labels, n_classes)
    rng = np.random.default_rng(seed)
    assignments: list[list[int]] = [[] for _ in range(n_nodes)]
    cursor = 0
    for c in range(n_classes):
        members = rng.permutation(np.flatnonzero(labels == c))
        for idx in members:
            assignments[cursor % n_nodes].append(int(idx))
            cursor += 1
    return PartitionPlan(
        "uniform", n_nodes, assignments, seed, _histogram(assignments, labels, n_classes)
    )


def normal_proportions(node_id: int, n_classes: int, n_nodes: int, spread: float = 0.2) -> np.ndarray:
    """Class proportions for node ``node_id`` (1-based) under the normal scheme."""
    mu = node_id * n_classes / n_nodes
    sigma = spread * n_classes
    c = np.arange(n_classes, dtype=np.float64)
    dens = np.exp(-0.5 * ((c - mu) / sigma) ** 2) / math.sqrt(2 * math.pi)
    return dens / dens.sum()


def largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to ``total`` closest to ``proportions * total``."""
    exact = np.asarray(proportions, dtype=np.float64) * total
    counts = np.floor(exact).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        # stable sort: equal remainders go to the lower class index
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def partition_normal(labels, n_classes: int, n_nodes: int, seed: int, spread: float = 0.2) -> PartitionPlan:
    """Class-skewed split where node k's classes follow a Gaussian around k*N/K.

    Every node receives exactly ``floor(total / K)`` samples. When several
    nodes ask for more of a class than exists, the class is shared out in
    proportion to the requests and each node's shortfall is backfilled one
    sample at a time from whichever class has the most samples left.
    """
    if n_nodes < 1:
        raise ValueError("need at least one node")
    labels = _check_labels(labels, n_classes)
    total = labels.size
    if total < n_nodes:
        raise InsufficientSamples(f"{total} samples cannot cover {n_nodes} nodes")
    quota = total // n_nodes
    requested = np.stack([
        largest_remainder(normal_proportions(k, n_classes, n_nodes, spread), quota)
        for k in range(1, n_nodes + 1)
    ])
    available = np.bincount(labels, minlength=n_classes).astype(np.int64)

    granted = np.zeros_like(requested)
    for c in range(n_classes):
        demand = int(requested[:, c].sum())
        if demand <= available[c]:
            granted[:, c] = requested[:, c]
        else:
            granted[:, c] = largest_remainder(requested[:, c] / demand, int(available[c]))
            # proportional sharing may not exceed what a node asked for
            granted[:, c] = np.minimum(granted[:, c], requested[:, c])
    remaining = available - granted.sum(axis=0)
    shortfall = quota - granted.sum(axis=1)

    # backfill one sample per node per pass so no single node drains a class
    while shortfall.sum() > 0:
        for k in range(n_nodes):
            if shortfall[k] == 0:
                continue
            c = int(np.argmax(remaining))
            if remaining[c] == 0:
                raise InsufficientSamples("ran out of samples while backfilling")
            granted[k, c] += 1
            remaining[c] -= 1
            shortfall[k] -= 1

    rng = np.random.default_rng(seed)
    pools = [list(rng.permutation(np.flatnonzero(labels == c))) for c in range(n_classes)]
    assignments: list[list[int]] = [[] for _ in range(n_nodes)]
    for k in range(n_nodes):
        for c in range(n_classes):
            take = int(granted[k, c])
            assignments[k].extend(int(i) for i in pools[c][:take])
            del pools[c][:take]
    for k in range(n_nodes):
        assignments[k] = [int(i) for i in rng.permutation(assignments[k])]
    return PartitionPlan(
        "normal", n_nodes, assignments, seed,
        _histogram(assignments, labels, n_classes), requested=requested,
    )


def local_split(indices, seed: int, node_id: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/test split of one node's partition.

    With a positive ``test_fraction`` at least one sample lands on each side
    when the partition has two or more; ``test_fraction=0`` keeps everything
    for training.
    """
    idx = np.asarray(indices, dtype=np.int64)
    order = np.random.default_rng([seed, node_id]).permutation(idx.size)
    n_test = int(round(idx.size * test_fraction))
    if idx.size >= 2 and test_fraction > 0:
        n_test = min(max(n_test, 1), idx.size - 1)
    # sorted, so nodes holding the same samples also hold them in the same order
    test = np.sort(idx[order[:n_test]])
    train = np.sort(idx[order[n_test:]])
    return train, test


def _simplex_means(n_classes: int, feature_dim: int, separation: float, rng) -> np.ndarray:
    if n_classes == 1:
        return np.zeros((1, feature_dim))
    if feature_dim < n_classes - 1:
        raise ValueError(f"feature_dim {feature_dim} cannot hold a {n_classes}-vertex simplex")
    # scaled basis vectors are pairwise `separation` apart; centre them, then
    # express them in an orthonormal basis of their (n_classes - 1)-dim span
    vertices = np.eye(n_classes) * (separation / math.sqrt(2.0))
    vertices -= vertices.mean(axis=0)
    u, _, _ = np.linalg.svd(vertices.T, full_matrices=False)
    coords = vertices @ u[:, : n_classes - 1]
    rotation, _ = np.linalg.qr(rng.standard_normal((feature_dim, n_classes - 1)))
    return coords @ rotation.T


def generate_blobs(n_classes: int, per_class: int, feature_dim: int, separation: float, seed: int) -> Dataset:
    """Unit-variance Gaussian clusters centred on a randomly rotated regular simplex."""
    rng = np.random.default_rng(seed)
    means = _simplex_means(n_classes, feature_dim, separation, rng)
    labels = np.repeat(np.arange(n_classes), per_class)
    features = means[labels] + rng.standard_normal((labels.size, feature_dim))
    return Dataset(features.astype(np.float32).reshape(labels.size, feature_dim), labels, n_classes)


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _idx_header(buf: bytes, magic: int, ndim: int, path) -> tuple[int, ...]:
    need = 4 + 4 * ndim
    if len(buf) < 4:
        raise Truncated(0, 4, len(buf))
    (got,) = struct.unpack(">I", buf[:4])
    if got != magic:
        raise BadMagic(f"{path}: expected magic {magic:#010x}, got {got:#010x}")
    if len(buf) < need:
        raise Truncated(4, need - 4, len(buf) - 4)
    dims = struct.unpack(f">{ndim}I", buf[4:need])
    size = int(np.prod(dims, dtype=np.int64))
    if len(buf) - need < size:
        raise Truncated(need, size, len(buf) - need)
    return dims


def load_idx(images_path, labels_path, class_count: int | None = None) -> Dataset:
    """Load an IDX image/label pair (MNIST layout), scaling pixels to [0, 1]."""
    img_buf = _read_bytes(images_path)
    lbl_buf = _read_bytes(labels_path)
    n_img, rows, cols = _idx_header(img_buf, IDX_IMAGES_MAGIC, 3, images_path)
    (n_lbl,) = _idx_header(lbl_buf, IDX_LABELS_MAGIC, 1, labels_path)
    if n_img != n_lbl:
        raise CountMismatch(f"{n_img} images but {n_lbl} labels")
    pixels = np.frombuffer(img_buf, dtype=np.uint8, count=n_img * rows * cols, offset=16)
    labels = np.frombuffer(lbl_buf, dtype=np.uint8, count=n_lbl, offset=8).astype(np.int64)
    features = (pixels.astype(np.float32) / 255.0).reshape(n_img, rows * cols)
    if class_count is None:
        class_count = max(int(labels.max()) + 1 if labels.size else 1, 10)
    return Dataset(features, labels, class_count)


def write_idx(images: np.ndarray, labels, images_path, labels_path) -> None:
    """Write uint8 images (n, rows, cols) and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())
