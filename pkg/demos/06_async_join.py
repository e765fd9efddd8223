"""
Joining a running network
=========================

Ten peers free-run their own round loops as separate processes. Two more
join at round 5: their first aggregation pulls the network's current models,
so they start near the system accuracy instead of from scratch.
"""

import tempfile

from edgefl import DataSpec, ExperimentConfig, TrainConfig, run_experiment

cfg = ExperimentConfig(
    nodes=10, rounds=10, alpha=0.3, join_schedule=[(11, 5), (12, 5)],
    mode="async", launcher="process", round_interval_ms=300, base_port=0,
    dataset=DataSpec("blobs", classes=5, per_class=2000, feature_dim=16, separation=5.0, seed=0),
    train=TrainConfig(32, 1, 0.1, 0), out_dir=tempfile.mkdtemp(prefix="edgefl-join-"),
)
report = run_experiment(cfg)

incumbents = [f"node{k:02d}" for k in range(1, 11)]
for rnd in report.accuracy.rounds():
    inc = [report.accuracy.table[(rnd, h)] for h in incumbents if (rnd, h) in report.accuracy.table]
    joiners = [f"{report.accuracy.table[(rnd, h)]:.3f}" for h in ("node11", "node12")
               if (rnd, h) in report.accuracy.table]
    print(f"round {rnd:2d}: incumbent mean {sum(inc) / len(inc):.3f}  joiners {' '.join(joiners) or '-'}")

print(f"mean weights update latency {report.summary['weights_update_latency_ms']:.1f} ms")
print("exit codes:", set(report.exit_codes.values()))
