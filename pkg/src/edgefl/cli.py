"""Command line entry point: ``edgefl <registry|peer|baseline|report|simulate|compare>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import signal
import sys
import time
from dataclasses import replace
from pathlib import Path

from .errors import EdgeFLError, NoRegistryReachable, PortInUse
from .fedavg import FedAvgConfig, run_fedavg
from .metrics import EventLog, read_event_glob, write_report
from .partition import PartitionPlan, local_split, partition_normal, partition_uniform
from .peer import Peer, PeerConfig, run_rounds
from .registry import RegistryClient, RegistryServer
from .trainer import ModelSpec, TrainConfig
from .weights import save

log = logging.getLogger("edgefl")


def _hidden(text: str) -> tuple[int, ...]:
    return tuple(int(h) for h in text.split(",") if h)


def _add_model_args(p):
    p.add_argument("--model", default="softmax_linear", choices=["softmax_linear", "mlp"])
    p.add_argument("--hidden", type=_hidden, default=(), help="comma-separated hidden sizes (mlp)")
    p.add_argument("--init-seed", type=int, default=0)


def _add_train_args(p):
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--shuffle-seed", type=int, default=0)


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(args.batch_size, args.epochs, args.lr, args.shuffle_seed)


def _model_spec(args, data) -> ModelSpec:
    return ModelSpec(args.model, data.feature_dim, data.class_count, args.hidden, args.init_seed)


def cmd_registry(args) -> int:
    try:
        server = RegistryServer(port=args.port, bind=args.bind)
    except PortInUse as exc:
        log.error("%s", exc)
        return 3
    log.info("registry listening on %s", server.url)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def _wait_for_peers(client: RegistryClient, count: int, timeout_s: float) -> None:
    deadline = time.monotonic() + timeout_s
    while len(client.peers()) < count:
        if time.monotonic() > deadline:
            raise TimeoutError(f"fewer than {count} peers registered after {timeout_s}s")
        time.sleep(0.02)


def _wait_stdin() -> None:
    try:
        while sys.stdin.readline():
            pass
    except (OSError, ValueError):
        pass


def cmd_peer(args) -> int:
    from .orchestrator import parse_data_arg

    data = parse_data_arg(args.data)
    if args.partition_file:
        plan = PartitionPlan.load(args.partition_file)
        indices = plan.indices_for(args.node_id)
    else:
        indices = range(len(data))
    train_idx, test_idx = local_split(indices, args.seed, args.node_id, args.test_fraction)
    train, test = data.subset(train_idx), data.subset(test_idx)

    config = PeerConfig(
        hostname=args.hostname, serve_port=args.port,
        registries=[u for u in args.registry.split(",") if u],
        alpha=args.alpha, aggregation=args.aggregation, include_self=args.include_self,
        fetch_timeout_ms=args.fetch_timeout_ms,
        rng_seed=args.rng_seed if args.rng_seed is not None else args.seed * 100_003 + args.node_id,
        stay_resident=args.stay_resident, link_delay_ms=args.link_delay_ms,
        advertise_host=args.advertise_host, bind=args.bind,
    )
    events = EventLog(args.metrics_out) if args.metrics_out else EventLog()
    peer = Peer(config, events)
    # SIGTERM unwinds through the finally block so the peer still unregisters
    signal.signal(signal.SIGTERM, lambda *_: sys.exit(143))
    try:
        peer.start()
    except (NoRegistryReachable, PortInUse) as exc:
        log.error("%s: %s", args.hostname, exc)
        return 3
    try:
        if args.start_gate and not sys.stdin.readline():
            log.error("%s: stdin closed before the start signal", args.hostname)
            return 1
        if args.wait_for_peers:
            _wait_for_peers(peer.registry, args.wait_for_peers, timeout_s=60)
        summaries = run_rounds(
            peer, train, _model_spec(args, data), _train_cfg(args), args.rounds,
            test=test, start_round=args.start_round,
            round_interval_ms=args.round_interval_ms, checkpoint_dir=args.checkpoint_dir,
        )
        for s in summaries:
            log.info("%s round %d: fetched %d, accuracy %s", args.hostname, s.round,
                     len(s.fetched_from), s.accuracy)
        print("ROUNDS_DONE", flush=True)
        if args.linger:
            # stay registered and serving until the supervisor closes stdin
            _wait_stdin()
            peer.unregister_peer()
        else:
            peer.unregister_peer()
            if args.stay_resident:
                _wait_stdin()
    finally:
        peer.stop()
        events.close()
    return 0


def cmd_baseline(args) -> int:
    from .orchestrator import parse_data_arg

    data = parse_data_arg(args.data)
    if args.partition:
        plan = PartitionPlan.load(args.partition)
    elif args.distribution == "normal":
        plan = partition_normal(data.labels, data.class_count, args.nodes, args.seed, args.spread)
    else:
        plan = partition_uniform(data.labels, data.class_count, args.nodes, args.seed)
    cfg = FedAvgConfig(
        node_count=plan.node_count, rounds=args.rounds, train=_train_cfg(args),
        model=_model_spec(args, data), plan=plan, seed=args.seed,
        client_fraction=args.alpha_frac, test_fraction=args.test_fraction,
        weighting=args.weighting,
    )
    history = run_fedavg(cfg, data)
    rows = [{"round": h.round, "mean_local_accuracy": h.mean_local_accuracy,
             "mean_global_accuracy": h.mean_global_accuracy} for h in history]
    if args.metrics_out:
        out = Path(args.metrics_out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["round"])
            writer.writeheader()
            writer.writerows(rows)
    if args.save_model and history:
        save(history[-1].weights, args.save_model)
    for row in rows:
        print(f"round {row['round']:3d}  local {row['mean_local_accuracy']:.4f}  "
              f"global {row['mean_global_accuracy']:.4f}")
    return 0


def cmd_report(args) -> int:
    events = read_event_glob(args.events)
    if not events:
        log.error("no events matched %s", args.events)
        return 1
    summary = write_report(events, args.out)
    print(json.dumps(summary, indent=2))
    return 0


def _experiment_config(args):
    from .orchestrator import ExperimentConfig, load_config

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in ("nodes", "rounds", "alpha", "mode", "launcher", "seed", "out_dir",
                 "base_port", "distribution", "round_interval_ms", "aggregation", "timeout_s"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.no_include_self:
        overrides["include_self"] = False
    return replace(cfg, **overrides) if overrides else cfg


def _add_experiment_args(p):
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--nodes", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mode", choices=["async", "lockstep"])
    p.add_argument("--launcher", choices=["process", "thread"])
    p.add_argument("--distribution", choices=["uniform", "normal"])
    p.add_argument("--aggregation")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--base-port", dest="base_port", type=int)
    p.add_argument("--round-interval-ms", dest="round_interval_ms", type=int)
    p.add_argument("--timeout-s", dest="timeout_s", type=float)
    p.add_argument("--no-include-self", action="store_true")


def cmd_simulate(args) -> int:
    from .orchestrator import run_experiment

    report = run_experiment(_experiment_config(args))
    means = report.accuracy.round_mean
    for rnd, acc in means.items():
        print(f"round {rnd:3d}  mean accuracy {acc:.4f}")
    print(f"report written to {report.out_dir}")
    return 0 if report.ok else 1


def cmd_compare(args) -> int:
    from .orchestrator import run_comparison

    comp = run_comparison(_experiment_config(args))
    for row in comp.rows:
        print(f"round {row['round']:3d}  edgefl {row['edgefl_mean_accuracy']:.4f}  "
              f"fedavg {row['fedavg_mean_accuracy']:.4f}")
    return 0 if comp.edgefl.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgefl", description="Serverless federated learning on edge peers")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("registry", help="run a registration node")
    p.add_argument("--port", type=int, default=7000)
    p.add_argument("--bind", default="127.0.0.1")
    p.set_defaults(func=cmd_registry)

    p = sub.add_parser("peer", help="run one edge peer")
    p.add_argument("--hostname", required=True)
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--advertise-host", default="127.0.0.1")
    p.add_argument("--registry", required=True, help="comma-separated registry URLs, tried in order")
    p.add_argument("--alpha", type=float, default=1.0)
    _add_train_args(p)
    _add_model_args(p)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--start-round", type=int, default=1)
    p.add_argument("--data", required=True, help="blobs:k=v,... | idx:<images>,<labels> | file.npz")
    p.add_argument("--partition-file")
    p.add_argument("--node-id", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--no-include-self", dest="include_self", action="store_false")
    p.add_argument("--stay-resident", action="store_true")
    p.add_argument("--linger", action="store_true",
                   help="after the last round stay registered until stdin closes")
    p.add_argument("--aggregation", default="uniform_average")
    p.add_argument("--fetch-timeout-ms", type=int, default=2000)
    p.add_argument("--link-delay-ms", type=int, default=0)
    p.add_argument("--round-interval-ms", type=int)
    p.add_argument("--start-gate", action="store_true",
                   help="after registering, wait for one line on stdin before round 1")
    p.add_argument("--wait-for-peers", type=int, default=0,
                   help="poll the registry until this many peers are registered")
    p.add_argument("--metrics-out")
    p.add_argument("--checkpoint-dir")
    p.set_defaults(func=cmd_peer)

    p = sub.add_parser("baseline", help="run centralized FedAvg in-process")
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--alpha-frac", type=float, default=1.0)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", help="PartitionPlan JSON; generated when omitted")
    p.add_argument("--distribution", choices=["uniform", "normal"], default="uniform")
    p.add_argument("--spread", type=float, default=0.2)
    p.add_argument("--weighting", choices=["uniform_average", "weighted_average"], default="uniform_average")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    _add_train_args(p)
    _add_model_args(p)
    p.add_argument("--metrics-out")
    p.add_argument("--save-model")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="compute metrics from event logs")
    p.add_argument("--events", required=True, help="glob of JSONL event files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="run a full experiment")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run EdgeFL and FedAvg side by side")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except EdgeFLError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
