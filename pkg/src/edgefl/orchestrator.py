"""Run whole experiments: data, partition, registry, peers, reports.

Two scheduling modes exist. ``async`` lets every peer free-run its own
round loop (the normal operating mode); peers are OS processes by default.
``lockstep`` drives in-process peers phase by phase with a barrier after
each phase, which makes the run directly comparable with centralized FedAvg.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ExperimentTimeout, LaunchFailure, PortInUse
from .fedavg import FedAvgConfig, FedAvgRound, run_fedavg
from .metrics import ClassificationReport, EventLog, RoundEvent, classification_report, read_events, write_report
from .partition import PartitionPlan, generate_blobs, load_idx, local_split, partition_normal, partition_uniform
from .peer import Peer, PeerConfig, RoundRunner, RoundSummary, run_rounds
from .registry import RegistryClient, RegistryServer
from .trainer import Dataset, ModelSpec, TrainConfig
from .weights import WeightSet

log = logging.getLogger(__name__)

MODES = ("async", "lockstep")
LAUNCHERS = ("process", "thread")


@dataclass
class DataSpec:
    kind: str = "blobs"
    classes: int = 5
    per_class: int = 400
    feature_dim: int = 16
    separation: float = 4.0
    seed: int = 0
    images: str | None = None
    labels: str | None = None

    def load(self) -> Dataset:
        if self.kind == "blobs":
            return generate_blobs(self.classes, self.per_class, self.feature_dim, self.separation, self.seed)
        if self.kind == "idx":
            return load_idx(self.images, self.labels)
        raise ValueError(f"unknown dataset kind {self.kind!r}")

    def to_arg(self) -> str:
        if self.kind == "blobs":
            return (f"blobs:classes={self.classes},per_class={self.per_class},"
                    f"dim={self.feature_dim},separation={self.separation!r},seed={self.seed}")
        return f"idx:{self.images},{self.labels}"


def parse_data_arg(arg: str) -> Dataset:
    """Load a dataset from ``blobs:k=v,...``, ``idx:<images>,<labels>`` or an ``.npz`` path."""
    if arg.startswith("blobs:"):
        opts = dict(kv.split("=", 1) for kv in arg[len("blobs:"):].split(",") if kv)
        return DataSpec(
            "blobs",
            classes=int(opts.get("classes", 5)),
            per_class=int(opts.get("per_class", 400)),
            feature_dim=int(opts.get("dim", 16)),
            separation=float(opts.get("separation", 4.0)),
            seed=int(opts.get("seed", 0)),
        ).load()
    if arg.startswith("idx:"):
        images, labels = arg[len("idx:"):].split(",", 1)
        return load_idx(images, labels)
    with np.load(arg) as npz:
        labels = npz["labels"]
        class_count = int(npz["class_count"]) if "class_count" in npz else int(labels.max()) + 1
        return Dataset(npz["features"], labels, class_count)


@dataclass
class ExperimentConfig:
    nodes: int = 10
    rounds: int = 20
    alpha: float = 1.0
    model_kind: str = "softmax_linear"
    hidden_dims: tuple[int, ...] = ()
    init_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: DataSpec = field(default_factory=DataSpec)
    distribution: str = "uniform"
    spread: float = 0.2
    # (node_id, round): node first trains in `round`
    join_schedule: list[tuple[int, int]] = field(default_factory=list)
    # (node_id, round): node unregisters after finishing `round`
    leave_schedule: list[tuple[int, int]] = field(default_factory=list)
    mode: str = "async"
    launcher: str = "process"
    include_self: bool = True
    aggregation: str = "uniform_average"
    stay_resident: bool = False
    seed: int = 0
    out_dir: str = "runs/experiment"
    base_port: int = 7000
    fetch_timeout_ms: int = 2000
    round_interval_ms: int | None = None
    link_delay_ms: int = 0
    test_fraction: float = 0.2
    timeout_s: float = 600.0

    def __post_init__(self):
        self.hidden_dims = tuple(self.hidden_dims)
        self.join_schedule = [tuple(map(int, x)) for x in self.join_schedule]
        self.leave_schedule = [tuple(map(int, x)) for x in self.leave_schedule]
        if self.nodes < 1:
            raise ValueError("nodes must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.launcher not in LAUNCHERS:
            raise ValueError(f"launcher must be one of {LAUNCHERS}")
        if self.distribution not in ("uniform", "normal"):
            raise ValueError("distribution must be 'uniform' or 'normal'")
        for name, sched in (("join", self.join_schedule), ("leave", self.leave_schedule)):
            ids = [n for n, _ in sched]
            if len(ids) != len(set(ids)):
                raise ValueError(f"{name}_schedule repeats a node id")
            for node_id, rnd in sched:
                if node_id < 1:
                    raise ValueError(f"{name}_schedule: node ids start at 1")
                if not 0 <= rnd <= self.rounds:
                    raise ValueError(f"{name}_schedule: round {rnd} outside [0, {self.rounds}]")

    @property
    def node_ids(self) -> list[int]:
        return sorted(set(range(1, self.nodes + 1)) | {n for n, _ in self.join_schedule})

    def join_round(self, node_id: int) -> int:
        return max(dict(self.join_schedule).get(node_id, 1), 1)

    def leave_round(self, node_id: int) -> int | None:
        return dict(self.leave_schedule).get(node_id)

    def last_round(self, node_id: int) -> int:
        leave = self.leave_round(node_id)
        return self.rounds if leave is None else min(leave, self.rounds)

    def model_spec(self, data: Dataset) -> ModelSpec:
        return ModelSpec(self.model_kind, data.feature_dim, data.class_count,
                         self.hidden_dims, self.init_seed)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(doc.get("train"), dict):
            doc["train"] = TrainConfig(**doc["train"])
        if isinstance(doc.get("dataset"), dict):
            doc["dataset"] = DataSpec(**doc["dataset"])
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    return ExperimentConfig.from_dict(doc)


def hostname_for(node_id: int) -> str:
    return f"node{node_id:02d}"


def make_plan(cfg: ExperimentConfig, data: Dataset) -> PartitionPlan:
    ids = cfg.node_ids
    if cfg.distribution == "uniform":
        plan = partition_uniform(data.labels, data.class_count, len(ids), cfg.seed)
    else:
        plan = partition_normal(data.labels, data.class_count, len(ids), cfg.seed, cfg.spread)
    plan.node_ids = ids
    return plan


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    out_dir: Path
    summary: dict
    accuracy: ClassificationReport
    events: list[RoundEvent]
    exit_codes: dict[str, int]
    # lockstep only: round -> hostname -> model every node agreed on after that round
    consensus: dict[int, dict[str, WeightSet]] = field(default_factory=dict)
    # in-process peers only
    summaries: dict[str, list[RoundSummary]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(code == 0 for code in self.exit_codes.values())

    def round_mean(self, rnd: int) -> float:
        return self.accuracy.round_mean[rnd]


def _peer_config(cfg: ExperimentConfig, node_id: int, registry_url: str) -> PeerConfig:
    return PeerConfig(
        hostname=hostname_for(node_id),
        serve_port=cfg.base_port + node_id if cfg.base_port else 0,
        registries=[registry_url],
        alpha=cfg.alpha,
        aggregation=cfg.aggregation,
        include_self=cfg.include_self,
        fetch_timeout_ms=cfg.fetch_timeout_ms,
        rng_seed=cfg.seed * 100_003 + node_id,
        stay_resident=cfg.stay_resident,
        link_delay_ms=cfg.link_delay_ms,
    )


def _node_data(cfg, data, plan, node_id) -> tuple[Dataset, Dataset]:
    train_idx, test_idx = local_split(plan.indices_for(node_id), cfg.seed, node_id, cfg.test_fraction)
    return data.subset(train_idx), data.subset(test_idx)


def _max_round_started(events_dir: Path, hosts: list[str]) -> int:
    best = 0
    for host in hosts:
        path = events_dir / f"{host}.jsonl"
        if not path.exists():
            continue
        try:
            for ev in read_events([path]):
                if ev.kind == "train_start":
                    best = max(best, ev.round)
        except (json.JSONDecodeError, TypeError):
            continue  # partially written line
    return best


class _ThreadPeer:
    """A peer running ``run_rounds`` on a background thread."""

    def __init__(self, cfg, node_id, registry_url, data, plan, model, events_dir, gated):
        self.node_id = node_id
        self.host = hostname_for(node_id)
        self.cfg = cfg
        self.events = EventLog(events_dir / f"{self.host}.jsonl")
        self.peer = Peer(_peer_config(cfg, node_id, registry_url), self.events)
        self.train, self.test = _node_data(cfg, data, plan, node_id)
        self.model = model
        self._gate = threading.Event()
        if not gated:
            self._gate.set()
        self.summaries: list[RoundSummary] = []
        self.exit_code: int | None = None
        self.rounds_done = threading.Event()
        self._release = threading.Event()
        self._thread = threading.Thread(target=self._main, name=self.host, daemon=True)

    def launch(self):
        try:
            self.peer.start()
        except (PortInUse, OSError) as exc:
            raise LaunchFailure(self.host, str(exc)) from exc
        self._thread.start()

    def _main(self):
        try:
            self._gate.wait()
            if self._release.is_set():
                raise RuntimeError("released before the start signal")
            start = self.cfg.join_round(self.node_id)
            n = self.cfg.last_round(self.node_id) - start + 1
            self.summaries = run_rounds(
                self.peer, self.train, self.model, self.cfg.train, max(n, 0), test=self.test,
                start_round=start, round_interval_ms=self.cfg.round_interval_ms,
            )
            self.rounds_done.set()
            if self.cfg.leave_round(self.node_id) is not None:
                self.peer.unregister_peer()
            self._release.wait()
            self.peer.stop()
            self.exit_code = 0
        except Exception:
            log.exception("%s failed", self.host)
            self.exit_code = 1
            self.rounds_done.set()
            self.peer.stop()
        finally:
            self.events.close()

    def finished(self) -> bool:
        return self.rounds_done.is_set()

    def open_gate(self):
        self._gate.set()

    def release(self):
        self._release.set()
        self._gate.set()

    def join(self, timeout=None):
        self._thread.join(timeout)

    def kill(self):
        self.release()


class _ProcessPeer:
    """A peer running as ``python -m edgefl peer ...`` in a child process."""

    def __init__(self, cfg, node_id, registry_url, data_arg, plan_path, events_dir, ckpt_dir, gated):
        self.node_id = node_id
        self.host = hostname_for(node_id)
        self.cfg = cfg
        start = cfg.join_round(node_id)
        n = cfg.last_round(node_id) - start + 1
        pc = _peer_config(cfg, node_id, registry_url)
        t = cfg.train
        self.argv = [
            sys.executable, "-m", "edgefl", "peer",
            "--hostname", pc.hostname, "--port", str(pc.serve_port),
            "--registry", registry_url, "--alpha", repr(pc.alpha),
            "--epochs", str(t.local_epochs), "--batch-size", str(t.batch_size),
            "--lr", repr(t.learning_rate), "--shuffle-seed", str(t.shuffle_seed),
            "--rounds", str(max(n, 0)), "--start-round", str(start),
            "--data", data_arg, "--partition-file", str(plan_path),
            "--node-id", str(node_id), "--seed", str(cfg.seed),
            "--rng-seed", str(pc.rng_seed),
            "--model", cfg.model_kind, "--init-seed", str(cfg.init_seed),
            "--aggregation", pc.aggregation, "--fetch-timeout-ms", str(pc.fetch_timeout_ms),
            "--test-fraction", repr(cfg.test_fraction),
            "--metrics-out", str(events_dir / f"{self.host}.jsonl"),
            "--checkpoint-dir", str(ckpt_dir / self.host),
        ]
        if gated:
            self.argv.append("--start-gate")
        if cfg.hidden_dims:
            self.argv += ["--hidden", ",".join(map(str, cfg.hidden_dims))]
        if not pc.include_self:
            self.argv.append("--no-include-self")
        if pc.stay_resident:
            self.argv.append("--stay-resident")
        if cfg.leave_round(node_id) is None:
            self.argv.append("--linger")
        if cfg.round_interval_ms:
            self.argv += ["--round-interval-ms", str(cfg.round_interval_ms)]
        if pc.link_delay_ms:
            self.argv += ["--link-delay-ms", str(pc.link_delay_ms)]
        self.proc: subprocess.Popen | None = None
        self.rounds_done = threading.Event()
        self.stderr_tail: list[str] = []

    def launch(self):
        env = dict(os.environ)
        src = str(Path(__file__).resolve().parents[1])
        env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
        try:
            self.proc = subprocess.Popen(
                self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, text=True, env=env,
            )
        except OSError as exc:
            raise LaunchFailure(self.host, str(exc)) from exc
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

    def _pump_stdout(self):
        for line in self.proc.stdout:
            if line.strip() == "ROUNDS_DONE":
                self.rounds_done.set()
        self.rounds_done.set()

    def _pump_stderr(self):
        for line in self.proc.stderr:
            self.stderr_tail = (self.stderr_tail + [line.rstrip()])[-20:]

    def finished(self) -> bool:
        return self.rounds_done.is_set()

    def open_gate(self):
        try:
            self.proc.stdin.write("go\n")
            self.proc.stdin.flush()
        except (OSError, ValueError):
            pass  # the child already died; _check_alive reports it

    def release(self):
        if self.proc and self.proc.stdin and not self.proc.stdin.closed:
            try:
                self.proc.stdin.close()
            except OSError:
                pass

    def join(self, timeout=None):
        if self.proc:
            try:
                self.proc.wait(timeout)
            except subprocess.TimeoutExpired:
                pass

    def kill(self):
        if self.proc and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()

    @property
    def exit_code(self):
        return None if self.proc is None else self.proc.poll()


def run_experiment(cfg: ExperimentConfig, data: Dataset | None = None) -> ExperimentReport:
    """Materialize ``cfg`` end to end and write events plus reports to ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    events_dir = out / "events"
    events_dir.mkdir(parents=True, exist_ok=True)
    for stale in events_dir.glob("*.jsonl"):
        stale.unlink()
    if data is None:
        data = cfg.dataset.load()
    plan = make_plan(cfg, data)
    plan.save(out / "partition.json")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, default=list))
    model = cfg.model_spec(data)

    try:
        registry = RegistryServer(port=cfg.base_port).start()
    except PortInUse as exc:
        raise LaunchFailure("registry", str(exc)) from exc
    try:
        if cfg.mode == "lockstep":
            exit_codes, consensus, summaries = _run_lockstep(cfg, data, plan, model, registry.url, events_dir)
        elif cfg.launcher == "thread":
            exit_codes, summaries = _run_async(cfg, registry.url, events_dir, out, data=data, plan=plan, model=model)
            consensus = {}
        else:
            exit_codes, summaries = _run_async(cfg, registry.url, events_dir, out,
                                               data_arg=_data_arg(cfg, data, out), plan_path=out / "partition.json")
            consensus = {}
    finally:
        registry.stop()

    events = read_events(sorted(events_dir.glob("*.jsonl")))
    summary = write_report(events, out)
    return ExperimentReport(cfg, out, summary, classification_report(events), events,
                            exit_codes, consensus, summaries)


def _data_arg(cfg: ExperimentConfig, data: Dataset, out: Path) -> str:
    if cfg.dataset.kind in ("blobs", "idx"):
        return cfg.dataset.to_arg()
    path = out / "dataset.npz"
    np.savez(path, features=data.features, labels=data.labels, class_count=data.class_count)
    return str(path)


def _run_lockstep(cfg, data, plan, model, registry_url, events_dir):
    peers: dict[int, Peer] = {}
    runners: dict[int, RoundRunner] = {}
    logs: dict[int, EventLog] = {}
    for node_id in cfg.node_ids:
        host = hostname_for(node_id)
        logs[node_id] = EventLog(events_dir / f"{host}.jsonl")
        peers[node_id] = Peer(_peer_config(cfg, node_id, registry_url), logs[node_id])
        train, test = _node_data(cfg, data, plan, node_id)
        runners[node_id] = RoundRunner(peers[node_id], train, test, model, cfg.train)

    consensus: dict[int, dict[str, WeightSet]] = {}
    deadline = time.monotonic() + cfg.timeout_s
    pool = ThreadPoolExecutor(max_workers=max(len(peers), 1))
    try:
        t0 = time.monotonic()
        for rnd in range(1, cfg.rounds + 2):
            closing = rnd == cfg.rounds + 1
            if not closing:
                for node_id in cfg.node_ids:
                    if cfg.join_round(node_id) == rnd:
                        try:
                            peers[node_id].start()
                        except (PortInUse, OSError) as exc:
                            raise LaunchFailure(hostname_for(node_id), str(exc)) from exc
            active = [n for n in cfg.node_ids
                      if peers[n].state == "started" and cfg.join_round(n) <= rnd]
            if cfg.round_interval_ms and not closing:
                delay = t0 + (rnd - 1) * cfg.round_interval_ms / 1000 - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            # phase 1: everyone aggregates from the models published last round
            aggregated = dict(zip(active, pool.map(lambda n: runners[n].aggregate(rnd), active)))
            if rnd > 1:
                consensus[rnd - 1] = {hostname_for(n): w for n, w in aggregated.items()}
            if closing:
                break
            # phase 2: everyone trains and publishes
            list(pool.map(lambda n: runners[n].train_and_publish(rnd), active))
            for node_id in active:
                if cfg.leave_round(node_id) == rnd:
                    peers[node_id].unregister_peer()
            if time.monotonic() > deadline:
                raise ExperimentTimeout(f"lockstep run exceeded {cfg.timeout_s}s")
    finally:
        pool.shutdown(wait=True)
        for peer in peers.values():
            if peer.state != "created":
                peer.stop()
        for ev_log in logs.values():
            ev_log.close()
    exit_codes = {hostname_for(n): 0 for n in cfg.node_ids}
    summaries = {hostname_for(n): runners[n].summaries for n in cfg.node_ids}
    return exit_codes, consensus, summaries


def _run_async(cfg, registry_url, events_dir, out, *, data=None, plan=None, model=None,
               data_arg=None, plan_path=None):
    incumbents = [n for n in cfg.node_ids if cfg.join_round(n) <= 1]
    joiners = sorted((n for n in cfg.node_ids if cfg.join_round(n) > 1), key=cfg.join_round)
    ckpt_dir = out / "checkpoints"

    def make(node_id, gated):
        if cfg.launcher == "thread":
            return _ThreadPeer(cfg, node_id, registry_url, data, plan, model, events_dir, gated)
        return _ProcessPeer(cfg, node_id, registry_url, data_arg, plan_path, events_dir, ckpt_dir, gated)

    handles = {}
    deadline = time.monotonic() + cfg.timeout_s
    client = RegistryClient([registry_url])
    try:
        for node_id in incumbents:
            handles[node_id] = make(node_id, True)
            handles[node_id].launch()
        # incumbents start round 1 together, once all of them are registered
        _await_registration(handles, incumbents, client, deadline)
        for node_id in incumbents:
            handles[node_id].open_gate()

        incumbent_hosts = [hostname_for(n) for n in incumbents]
        for node_id in joiners:
            # launch once some incumbent has begun the join round
            while _max_round_started(events_dir, incumbent_hosts) < cfg.join_round(node_id):
                _check_alive(handles, deadline)
                if all(h.finished() for h in handles.values()):
                    break
                time.sleep(0.01)
            handles[node_id] = make(node_id, False)
            handles[node_id].launch()
            _await_registration(handles, [node_id], client, deadline)

        while not all(h.finished() for h in handles.values()):
            _check_alive(handles, deadline)
            time.sleep(0.02)
    except BaseException:
        for h in handles.values():
            h.kill()
        raise
    finally:
        for h in handles.values():
            h.release()
        for h in handles.values():
            h.join(timeout=15)
        for h in handles.values():
            h.kill()

    exit_codes = {h.host: (h.exit_code if h.exit_code is not None else -1) for h in handles.values()}
    summaries = {h.host: h.summaries for h in handles.values() if isinstance(h, _ThreadPeer)}
    return exit_codes, summaries


def _check_alive(handles, deadline):
    if time.monotonic() > deadline:
        raise ExperimentTimeout("experiment exceeded its wall-clock budget")
    for h in handles.values():
        if isinstance(h, _ProcessPeer) and h.proc.poll() not in (None, 0) and not h.finished():
            raise LaunchFailure(h.host, "\n".join(h.stderr_tail) or f"exit code {h.proc.poll()}")


def _await_registration(handles, node_ids, client, deadline):
    wanted = {hostname_for(n) for n in node_ids}
    while True:
        present = {r.hostname for r in client.peers()}
        if wanted <= present:
            return
        for n in node_ids:
            h = handles[n]
            if isinstance(h, _ProcessPeer) and h.proc.poll() is not None:
                raise LaunchFailure(h.host, "\n".join(h.stderr_tail) or f"exit code {h.proc.poll()}")
            if isinstance(h, _ThreadPeer) and h.exit_code not in (None, 0):
                raise LaunchFailure(h.host, "peer thread failed")
        if time.monotonic() > deadline:
            raise ExperimentTimeout(f"peers {sorted(wanted - present)} never registered")
        time.sleep(0.02)


@dataclass
class ComparisonReport:
    edgefl: ExperimentReport
    fedavg: list[FedAvgRound]
    rows: list[dict]

    def column(self, name: str) -> list[float]:
        return [row[name] for row in self.rows]


COMPARISON_FIELDS = ("round", "edgefl_mean_accuracy", "fedavg_mean_accuracy", "fedavg_global_mean_accuracy")


def run_comparison(cfg: ExperimentConfig, data: Dataset | None = None) -> ComparisonReport:
    """Run EdgeFL and FedAvg on the same data, partition and seed; write comparison.csv."""
    if data is None:
        data = cfg.dataset.load()
    edge = run_experiment(cfg, data)
    plan = make_plan(cfg, data)
    fed_cfg = FedAvgConfig(
        node_count=plan.node_count, rounds=cfg.rounds, train=cfg.train,
        model=cfg.model_spec(data), plan=plan, seed=cfg.seed,
        test_fraction=cfg.test_fraction,
    )
    fed = run_fedavg(fed_cfg, data)
    rows = []
    for fr in fed:
        rows.append({
            "round": fr.round,
            "edgefl_mean_accuracy": edge.accuracy.round_mean.get(fr.round, math.nan),
            "fedavg_mean_accuracy": fr.mean_local_accuracy,
            "fedavg_global_mean_accuracy": fr.mean_global_accuracy,
        })
    out = Path(cfg.out_dir)
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COMPARISON_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    (out / "comparison.json").write_text(json.dumps({
        "edgefl_weights_update_latency_ms": edge.summary["weights_update_latency_ms"],
        "edgefl_model_evolution_time_ms": edge.summary["model_evolution_time_ms"],
        "edgefl_final_mean_accuracy": edge.summary["final_mean_accuracy"],
        "fedavg_final_mean_accuracy": rows[-1]["fedavg_mean_accuracy"] if rows else None,
        "mode": cfg.mode,
    }, indent=2))
    return ComparisonReport(edge, fed, rows)
