"""Model parameters, their binary format, and the averaging operator.

A :class:`WeightSet` is an ordered list of named float32 tensors plus the
metadata a peer stamps on every published model (version, producer and a
millisecond timestamp).

Binary layout (little-endian)::

    b"EFL1"
    version        u64
    producer_len   u16, producer (UTF-8)
    produced_at_ms u64
    entry_count    u32
    per entry:     name_len u16, name (UTF-8), rank u8, dims rank*u32,
                   data prod(dims)*f32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    BadWeights,
    DuplicateEntry,
    EmptyInput,
    NonFiniteInput,
    ShapeDataMismatch,
    ShapeMismatch,
    TrailingData,
    Truncated,
)

MAGIC = b"EFL1"

_U16_MAX = 0xFFFF


def _frozen_f32(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=np.float32)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Immutable ordered collection of named float32 tensors."""

    entries: tuple[tuple[str, np.ndarray], ...] = ()
    version: int = 0
    producer: str = ""
    produced_at: int = 0

    def __post_init__(self):
        frozen = []
        seen = set()
        for name, data in self.entries:
            if not isinstance(name, str):
                raise TypeError(f"entry name must be str, got {type(name).__name__}")
            if name in seen:
                raise DuplicateEntry(f"duplicate entry name {name!r}")
            seen.add(name)
            if isinstance(data, np.ndarray) and data.dtype == np.float32 and not data.flags.writeable:
                frozen.append((name, data))
            else:
                frozen.append((name, _frozen_f32(data)))
        object.__setattr__(self, "entries", tuple(frozen))
        if self.version < 0:
            raise ValueError("version must be non-negative")

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, object], **meta) -> "WeightSet":
        """Build from a name -> array-like mapping, keeping insertion order."""
        return cls(tuple((k, v) for k, v in arrays.items()), **meta)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    @property
    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        """The (name, shape) sequence used for compatibility checks."""
        return [(name, data.shape) for name, data in self.entries]

    def arrays(self) -> dict[str, np.ndarray]:
        return dict(self.entries)

    def __getitem__(self, name: str) -> np.ndarray:
        for key, data in self.entries:
            if key == name:
                return data
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.entries)

    def num_parameters(self) -> int:
        return sum(data.size for _, data in self.entries)

    def with_meta(self, **changes) -> "WeightSet":
        meta = dict(version=self.version, producer=self.producer, produced_at=self.produced_at)
        meta.update(changes)
        return WeightSet(self.entries, **meta)

    def same_values(self, other: "WeightSet") -> bool:
        """Bitwise equality of the tensors, ignoring metadata."""
        if self.layout != other.layout:
            return False
        return all(
            a.tobytes() == b.tobytes()
            for (_, a), (_, b) in zip(self.entries, other.entries)
        )

    def __eq__(self, other):
        if not isinstance(other, WeightSet):
            return NotImplemented
        return (
            self.version == other.version
            and self.producer == other.producer
            and self.produced_at == other.produced_at
            and self.same_values(other)
        )

    __hash__ = None

    def __repr__(self):
        layout = ", ".join(f"{n}{list(s)}" for n, s in self.layout)
        return f"WeightSet([{layout}], version={self.version}, producer={self.producer!r})"


def check_compatible(inputs: Sequence[WeightSet]) -> None:
    """Raise ShapeMismatch naming the first entry where layouts diverge."""
    reference = inputs[0].layout
    for idx, ws in enumerate(inputs[1:], start=1):
        layout = ws.layout
        for pos in range(max(len(reference), len(layout))):
            want = reference[pos] if pos < len(reference) else None
            got = layout[pos] if pos < len(layout) else None
            if want != got:
                raise ShapeMismatch(
                    f"input {idx} diverges at entry {pos}: expected {want}, got {got}"
                )


def _sorted_sum(stack: np.ndarray) -> np.ndarray:
    # folding from the first row (not from +0.0) keeps all-negative-zero sums at -0.0
    ordered = np.sort(stack, axis=0)
    total = ordered[0].copy()
    for row in ordered[1:]:
        total += row
    return total


def average(inputs: Sequence[WeightSet], weights: Sequence[float] | None = None) -> WeightSet:
    """Element-wise (optionally weighted) mean of shape-compatible weight sets.

    Accumulation happens in float64 with the per-element terms summed in
    sorted order, so the result does not depend on input order. The result
    is clipped to the element-wise input range before rounding to float32.
    """
    inputs = list(inputs)
    if not inputs:
        raise EmptyInput("average() needs at least one WeightSet")
    check_compatible(inputs)
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(inputs),):
            raise BadWeights(f"expected {len(inputs)} weights, got {weights.size}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise BadWeights("weights must be finite and non-negative")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise BadWeights(f"weights sum to {weights.sum()!r}, not 1")

    out = []
    for pos, (name, _) in enumerate(inputs[0].entries):
        stack = np.stack([ws.entries[pos][1] for ws in inputs]).astype(np.float64)
        if not np.all(np.isfinite(stack)):
            bad = [i for i in range(len(inputs)) if not np.all(np.isfinite(stack[i]))]
            raise NonFiniteInput(f"entry {name!r} has NaN/Inf in input(s) {bad}")
        if weights is None:
            mean = _sorted_sum(stack) / len(inputs)
        else:
            mean = _sorted_sum(stack * weights.reshape((-1,) + (1,) * (stack.ndim - 1)))
        # clamp only strict violations; np.clip would swap signed zeros
        lo, hi = stack.min(axis=0), stack.max(axis=0)
        mean = np.where(mean < lo, lo, np.where(mean > hi, hi, mean))
        out.append((name, _frozen_f32(mean)))
    return WeightSet(tuple(out), version=max(ws.version for ws in inputs) + 1)


def serialize(ws: WeightSet) -> bytes:
    producer = ws.producer.encode("utf-8")
    if len(producer) > _U16_MAX:
        raise ValueError("producer name too long")
    parts = [
        MAGIC,
        struct.pack("<QH", ws.version, len(producer)),
        producer,
        struct.pack("<QI", ws.produced_at, len(ws.entries)),
    ]
    for name, data in ws.entries:
        raw_name = name.encode("utf-8")
        if len(raw_name) > _U16_MAX:
            raise ValueError(f"entry name too long: {name[:32]!r}...")
        if data.ndim > 255:
            raise ValueError(f"entry {name!r} has rank {data.ndim} > 255")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack(f"<B{data.ndim}I", data.ndim, *data.shape))
        parts.append(data.astype("<f4", copy=False).tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        available = len(self.buf) - self.pos
        if n > available:
            raise Truncated(self.pos, n, available)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize(data: bytes) -> WeightSet:
    reader = _Reader(data)
    if len(data) >= 4 and bytes(data[:4]) != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {bytes(data[:4])!r}")
    reader.take(4)
    version, producer_len = reader.unpack("<QH")
    producer = bytes(reader.take(producer_len)).decode("utf-8")
    produced_at, count = reader.unpack("<QI")
    entries = []
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = bytes(reader.take(name_len)).decode("utf-8")
        (rank,) = reader.unpack("<B")
        dims = reader.unpack(f"<{rank}I")
        if any(d == 0 for d in dims):
            raise ShapeDataMismatch(name, f"shape {list(dims)} has a zero dimension")
        size = int(np.prod(dims, dtype=np.int64))
        raw = reader.take(4 * size)
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
        entries.append((name, arr))
    if reader.pos != len(data):
        raise TrailingData(f"{len(data) - reader.pos} unexpected bytes after last entry")
    return WeightSet(tuple(entries), version=version, producer=producer, produced_at=produced_at)


def save(ws: WeightSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(ws))


def load(path) -> WeightSet:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def max_abs_diff(a: WeightSet, b: WeightSet) -> float:
    """Largest element-wise absolute difference between two compatible sets."""
    check_compatible([a, b])
    diffs = [
        float(np.max(np.abs(x.astype(np.float64) - y.astype(np.float64)), initial=0.0))
        for (_, x), (_, y) in zip(a.entries, b.entries)
    ]
    return max(diffs, default=0.0)

