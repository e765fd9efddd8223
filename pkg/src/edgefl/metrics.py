"""Round events and the three experiment metrics derived from them.

Every peer appends :class:`RoundEvent` records to its own JSON Lines file.
Metrics are pure functions over a merged event list:

* weights update latency: receive minus send timestamp for matched fetches
* model evolution time: gap between consecutive deploys on one node
* classification report: per-round, per-node accuracy and the network mean

Timestamps come from the host's monotonic clock, so cross-node
subtraction is only valid when all peers share one machine.
"""

from __future__ import annotations

import csv
import glob
import json
import threading
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

from .errors import InsufficientDeploys, NoPairs

EVENT_KINDS = ("send", "receive", "train_start", "deploy", "evaluate")

CLOCK_NOTE = (
    "timestamps use a single-host monotonic clock; cross-node latencies are "
    "not valid for multi-host runs"
)


def now_ms() -> int:
    return time.monotonic_ns() // 1_000_000


@dataclass(frozen=True)
class RoundEvent:
    node: str
    round: int
    kind: str
    timestamp_ms: int
    counterpart: str | None = None
    payload_version: int | None = None
    accuracy: float | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind in ("send", "receive") and not self.counterpart:
            raise ValueError(f"{self.kind} events need a counterpart")

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "RoundEvent":
        return cls(**{k: doc.get(k) for k in cls.__dataclass_fields__})


class EventLog:
    """Append-only, thread-safe event sink with optional JSONL persistence."""

    def __init__(self, path=None):
        self._lock = threading.Lock()
        self._events: list[RoundEvent] = []
        self.path = Path(path) if path else None
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def record(self, node: str, round: int, kind: str, *, timestamp_ms: int | None = None,
               counterpart: str | None = None, payload_version: int | None = None,
               accuracy: float | None = None) -> RoundEvent:
        with self._lock:
            ev = RoundEvent(
                node, int(round), kind,
                now_ms() if timestamp_ms is None else int(timestamp_ms),
                counterpart, payload_version, accuracy,
            )
            self._events.append(ev)
            if self._fh:
                self._fh.write(ev.to_json() + "\n")
                self._fh.flush()
        return ev

    def events(self) -> list[RoundEvent]:
        with self._lock:
            return list(self._events)

    def close(self) -> None:
        with self._lock:
            if self._fh:
                self._fh.close()
                self._fh = None


def read_events(paths: Iterable) -> list[RoundEvent]:
    events = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(RoundEvent.from_dict(json.loads(line)))
    return events


def read_event_glob(pattern: str) -> list[RoundEvent]:
    return read_events(sorted(glob.glob(pattern)))


def matched_pairs(events: Iterable[RoundEvent], round: int | None = None) -> list[tuple[RoundEvent, RoundEvent]]:
    """Pair each receive with the sender's send of the same version in the same round."""
    sends = defaultdict(list)
    receives = []
    for ev in events:
        if round is not None and ev.round != round:
            continue
        if ev.kind == "send":
            sends[(ev.node, ev.counterpart, ev.payload_version, ev.round)].append(ev)
        elif ev.kind == "receive":
            receives.append(ev)
    for queue in sends.values():
        queue.sort(key=lambda e: e.timestamp_ms)
    pairs = []
    for rcv in sorted(receives, key=lambda e: e.timestamp_ms):
        queue = sends.get((rcv.counterpart, rcv.node, rcv.payload_version, rcv.round))
        if queue:
            pairs.append((queue.pop(0), rcv))
    return pairs


def weights_update_latency(events: Iterable[RoundEvent], round: int | None = None) -> float:
    """Mean send-to-receive time in ms over matched pairs (all rounds if ``round`` is None)."""
    pairs = matched_pairs(events, round)
    if not pairs:
        raise NoPairs(f"no matched send/receive pairs in round {round}")
    return sum(r.timestamp_ms - s.timestamp_ms for s, r in pairs) / len(pairs)


def model_evolution_time(events: Iterable[RoundEvent], node: str) -> float:
    stamps = sorted(ev.timestamp_ms for ev in events if ev.kind == "deploy" and ev.node == node)
    if len(stamps) < 2:
        raise InsufficientDeploys(f"node {node!r} has {len(stamps)} deploy event(s)")
    return (stamps[-1] - stamps[0]) / (len(stamps) - 1)


@dataclass
class ClassificationReport:
    table: dict[tuple[int, str], float]
    round_mean: dict[int, float]

    def rounds(self) -> list[int]:
        return sorted(self.round_mean)

    def node_accuracy(self, node: str) -> dict[int, float]:
        return {r: acc for (r, n), acc in sorted(self.table.items()) if n == node}


def classification_report(events: Iterable[RoundEvent]) -> ClassificationReport:
    table: dict[tuple[int, str], float] = {}
    for ev in events:
        if ev.kind == "evaluate" and ev.accuracy is not None:
            # a node evaluates once per round; a later record wins
            table[(ev.round, ev.node)] = float(ev.accuracy)
    by_round = defaultdict(list)
    for (r, _), acc in table.items():
        by_round[r].append(acc)
    return ClassificationReport(
        dict(sorted(table.items())),
        {r: sum(v) / len(v) for r, v in sorted(by_round.items())},
    )


REPORT_CSV_FIELDS = ("round", "node", "metric", "value")

SUMMARY_SCHEMA = {
    "type": "object",
    "required": [
        "nodes", "rounds", "mean_accuracy_by_round", "final_mean_accuracy",
        "weights_update_latency_ms", "latency_by_round_ms",
        "model_evolution_time_ms", "evolution_by_node_ms", "clock",
    ],
    "properties": {
        "nodes": {"type": "array", "items": {"type": "string"}},
        "rounds": {"type": "array", "items": {"type": "integer"}},
        "mean_accuracy_by_round": {"type": "object", "additionalProperties": {"type": "number"}},
        "final_mean_accuracy": {"type": ["number", "null"]},
        "weights_update_latency_ms": {"type": ["number", "null"], "minimum": 0},
        "latency_by_round_ms": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "model_evolution_time_ms": {"type": ["number", "null"], "minimum": 0},
        "evolution_by_node_ms": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "clock": {"type": "string"},
    },
}


def summarize(events: list[RoundEvent]) -> tuple[list[dict], dict]:
    """Build CSV rows (round,node,metric,value) and the JSON summary."""
    report = classification_report(events)
    nodes = sorted({ev.node for ev in events})
    rounds = sorted({ev.round for ev in events})
    rows = []
    for (r, node), acc in report.table.items():
        rows.append({"round": r, "node": node, "metric": "accuracy", "value": acc})
    for r, acc in report.round_mean.items():
        rows.append({"round": r, "node": "ALL", "metric": "mean_accuracy", "value": acc})

    latency_by_round = {}
    for r in rounds:
        try:
            latency_by_round[r] = weights_update_latency(events, r)
        except NoPairs:
            continue
        rows.append({"round": r, "node": "ALL", "metric": "weights_update_latency_ms",
                     "value": latency_by_round[r]})
    evolution = {}
    for node in nodes:
        try:
            evolution[node] = model_evolution_time(events, node)
        except InsufficientDeploys:
            continue
        rows.append({"round": "", "node": node, "metric": "model_evolution_time_ms",
                     "value": evolution[node]})

    try:
        overall_latency = weights_update_latency(events)
    except NoPairs:
        overall_latency = None
    final_round = max(report.round_mean) if report.round_mean else None
    summary = {
        "nodes": nodes,
        "rounds": rounds,
        "mean_accuracy_by_round": {str(r): v for r, v in report.round_mean.items()},
        "final_mean_accuracy": report.round_mean[final_round] if final_round is not None else None,
        "weights_update_latency_ms": overall_latency,
        "latency_by_round_ms": {str(r): v for r, v in latency_by_round.items()},
        "model_evolution_time_ms": (sum(evolution.values()) / len(evolution)) if evolution else None,
        "evolution_by_node_ms": evolution,
        "clock": CLOCK_NOTE,
    }
    return rows, summary


def write_report(events: list[RoundEvent], out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, summary = summarize(events)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_CSV_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary
