"""Named aggregation policies a peer can be configured with.

A policy maps ``(own, fetched)`` to one WeightSet. ``own`` is the peer's
latest published model, or None when it has none or excludes itself.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyInput
from .weights import WeightSet, average, check_compatible

Combine = Callable[[Optional[WeightSet], Sequence[WeightSet]], WeightSet]

_POLICIES: dict[str, Combine] = {}


def register_aggregation(name: str):
    """Decorator adding a combine function under ``name``."""
    def deco(fn: Combine) -> Combine:
        _POLICIES[name] = fn
        return fn
    return deco


def get_aggregation(name: str) -> Combine:
    try:
        return _POLICIES[name]
    except KeyError:
        raise KeyError(f"unknown aggregation {name!r}; known: {sorted(_POLICIES)}") from None


def available_aggregations() -> list[str]:
    return sorted(_POLICIES)


def _pool(own, fetched) -> list[WeightSet]:
    inputs = list(fetched)
    if own is not None:
        inputs.append(own)
    if not inputs:
        raise EmptyInput("nothing to aggregate")
    return inputs


@register_aggregation("uniform_average")
def uniform_average(own: WeightSet | None, fetched: Sequence[WeightSet]) -> WeightSet:
    return average(_pool(own, fetched))


def _coordinatewise(inputs: list[WeightSet], reducer) -> WeightSet:
    check_compatible(inputs)
    out = []
    for pos, (name, _) in enumerate(inputs[0].entries):
        stack = np.stack([ws.entries[pos][1] for ws in inputs]).astype(np.float64)
        out.append((name, reducer(stack).astype(np.float32)))
    return WeightSet(tuple(out), version=max(ws.version for ws in inputs) + 1)


@register_aggregation("trimmed_mean")
def trimmed_mean(own: WeightSet | None, fetched: Sequence[WeightSet], trim_fraction: float = 0.2) -> WeightSet:
    """Coordinate-wise mean after dropping the ``trim_fraction`` tails."""
    inputs = _pool(own, fetched)
    k = int(len(inputs) * trim_fraction)

    def reduce(stack):
        ordered = np.sort(stack, axis=0)
        return ordered[k:len(inputs) - k].mean(axis=0)

    return _coordinatewise(inputs, reduce)


@register_aggregation("median")
def median(own: WeightSet | None, fetched: Sequence[WeightSet]) -> WeightSet:
    return _coordinatewise(_pool(own, fetched), lambda s: np.median(s, axis=0))
