import csv
import json

import jsonschema
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgefl.errors import InsufficientDeploys, NoPairs
from edgefl.metrics import (
    REPORT_CSV_FIELDS,
    SUMMARY_SCHEMA,
    EventLog,
    RoundEvent,
    classification_report,
    model_evolution_time,
    read_event_glob,
    weights_update_latency,
    write_report,
)


def send(node, to, ts, rnd=1, version=1):
    return RoundEvent(node, rnd, "send", ts, counterpart=to, payload_version=version)


def recv(node, frm, ts, rnd=1, version=1):
    return RoundEvent(node, rnd, "receive", ts, counterpart=frm, payload_version=version)


def deploy(node, ts, rnd=1):
    return RoundEvent(node, rnd, "deploy", ts, payload_version=rnd)


def acc(node, rnd, value):
    return RoundEvent(node, rnd, "evaluate", 0, accuracy=value)


def test_single_pair_latency():
    assert weights_update_latency([send("a", "b", 100), recv("b", "a", 130)], 1) == 30


def test_mean_latency_over_pairs():
    events = [
        send("a", "b", 0), recv("b", "a", 10),
        send("a", "c", 0), recv("c", "a", 20),
        send("b", "c", 5), recv("c", "b", 35),
    ]
    assert weights_update_latency(events, 1) == 20


def test_pairs_match_on_version_and_round():
    events = [
        send("a", "b", 0, version=1), send("a", "b", 50, version=2),
        recv("b", "a", 60, version=2),
        send("a", "b", 0, rnd=2), recv("b", "a", 5, rnd=2),
    ]
    assert weights_update_latency(events, 1) == 10
    assert weights_update_latency(events, 2) == 5
    assert weights_update_latency(events) == 7.5


def test_no_pairs():
    with pytest.raises(NoPairs):
        weights_update_latency([send("a", "b", 0)], 1)
    with pytest.raises(NoPairs):
        weights_update_latency([send("a", "b", 0), recv("b", "c", 5)], 1)


def test_evolution_time():
    events = [deploy("a", 0), deploy("a", 100, 2), deploy("a", 300, 3), deploy("b", 7)]
    assert model_evolution_time(events, "a") == 150
    with pytest.raises(InsufficientDeploys):
        model_evolution_time(events, "b")


def test_classification_means():
    assert classification_report([acc("a", r, 0.5) for r in (1, 2)]).round_mean == {1: 0.5, 2: 0.5}
    report = classification_report([acc("a", 1, 0.4), acc("b", 1, 0.6)])
    assert report.round_mean[1] == pytest.approx(0.5)
    assert report.table == {(1, "a"): 0.4, (1, "b"): 0.6}
    assert classification_report([]).round_mean == {}


def test_event_validation():
    with pytest.raises(ValueError):
        RoundEvent("a", 1, "explode", 0)
    with pytest.raises(ValueError):
        RoundEvent("a", 1, "receive", 0)


def test_event_log_jsonl_round_trip(tmp_path):
    log = EventLog(tmp_path / "ev" / "a.jsonl")
    first = log.record("a", 1, "train_start")
    log.record("a", 1, "evaluate", accuracy=0.75)
    log.close()
    lines = (tmp_path / "ev" / "a.jsonl").read_text().splitlines()
    assert json.loads(lines[0]) == {
        "node": "a", "round": 1, "kind": "train_start", "timestamp_ms": first.timestamp_ms,
        "counterpart": None, "payload_version": None, "accuracy": None,
    }
    assert read_event_glob(str(tmp_path / "ev" / "*.jsonl")) == log.events()


def test_report_files_and_schema(tmp_path):
    events = [
        send("a", "b", 0), recv("b", "a", 30),
        deploy("a", 0), deploy("a", 100, 2),
        acc("a", 1, 0.4), acc("b", 1, 0.6),
    ]
    summary = write_report(events, tmp_path)
    jsonschema.validate(summary, SUMMARY_SCHEMA)
    assert json.loads((tmp_path / "summary.json").read_text()) == summary
    assert summary["weights_update_latency_ms"] == 30
    assert summary["model_evolution_time_ms"] == 100
    assert summary["final_mean_accuracy"] == pytest.approx(0.5)
    assert "single-host" in summary["clock"]
    with open(tmp_path / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == REPORT_CSV_FIELDS
    metrics = {(r["round"], r["node"], r["metric"]) for r in rows}
    assert ("1", "ALL", "mean_accuracy") in metrics
    assert ("1", "ALL", "weights_update_latency_ms") in metrics
    assert ("", "a", "model_evolution_time_ms") in metrics


def test_empty_report_is_valid(tmp_path):
    summary = write_report([], tmp_path)
    jsonschema.validate(summary, SUMMARY_SCHEMA)
    assert summary["weights_update_latency_ms"] is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 500)), min_size=1, max_size=20))
def test_latency_is_mean_of_gaps(pairs):
    events = []
    for i, (t, gap) in enumerate(pairs):
        events += [send("a", f"n{i}", t), recv(f"n{i}", "a", t + gap)]
    got = weights_update_latency(events[::-1], 1)
    assert got == pytest.approx(sum(g for _, g in pairs) / len(pairs))
    assert got >= 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=2, max_size=30, unique=True))
def test_evolution_is_mean_consecutive_gap(stamps):
    ordered = sorted(stamps)
    gaps = [b - a for a, b in zip(ordered, ordered[1:])]
    events = [deploy("a", t) for t in stamps]
    assert model_evolution_time(events, "a") == pytest.approx(sum(gaps) / len(gaps))
