"""
Latency and model evolution time
================================

Every peer logs timestamped events (send, receive, train_start, deploy,
evaluate). Latency pairs a sender's ``send`` with the receiver's
``receive``; evolution time is the gap between a node's deploys.
Here a 25 ms artificial link delay and a 250 ms round pace make both
numbers predictable.
"""

import tempfile

from edgefl import DataSpec, ExperimentConfig, run_experiment
from edgefl.metrics import CLOCK_NOTE

ds = DataSpec("blobs", classes=3, per_class=100, feature_dim=8, separation=3.0, seed=0)
report = run_experiment(ExperimentConfig(
    nodes=4, rounds=6, mode="lockstep", dataset=ds, base_port=0,
    link_delay_ms=25, round_interval_ms=250, out_dir=tempfile.mkdtemp(prefix="edgefl-metrics-"),
))
s = report.summary
print(f"weights update latency: {s['weights_update_latency_ms']:.1f} ms (link delay 25 ms)")
print(f"model evolution time:   {s['model_evolution_time_ms']:.1f} ms (round pace 250 ms)")
print("per round latency:", {r: round(v, 1) for r, v in s["latency_by_round_ms"].items()})
print("note:", CLOCK_NOTE)
print("files:", sorted(p.name for p in report.out_dir.iterdir()))
