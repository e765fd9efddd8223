"""The edge peer: serve the latest model, pull from random peers, aggregate.

Typical use mirrors the four-call integration surface::

    peer = Peer(PeerConfig(hostname="n1", serve_port=7001,
                           registries=["http://127.0.0.1:7000"]))
    peer.start()
    for r in range(rounds):
        w = peer.aggregation_func()
        w = node_training(w, data, cfg)
        peer.publish(w)
    peer.unregister_peer()
"""

from __future__ import annotations

import logging
import math
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler
from pathlib import Path

import numpy as np

from .aggregation import get_aggregation
from .errors import (
    FormatError,
    NoModelYet,
    NoPeersAvailable,
    NoRegistryReachable,
    NotStarted,
)
from .metrics import EventLog, now_ms
from .registry import OPENER, POLL_S, PeerRecord, RegistryClient, bind_server
from .trainer import Dataset, ModelSpec, TrainConfig, evaluate, init_weights, node_training
from .weights import WeightSet, deserialize, save, serialize

log = logging.getLogger(__name__)

MAX_PARALLEL_FETCHES = 16

HEADER_VERSION = "X-EdgeFL-Version"
HEADER_PRODUCER = "X-EdgeFL-Producer"
HEADER_REQUESTER = "X-EdgeFL-Requester"
HEADER_ROUND = "X-EdgeFL-Round"


@dataclass
class PeerConfig:
    hostname: str
    serve_port: int = 0
    registries: list[str] = field(default_factory=list)
    alpha: float = 1.0
    aggregation: str = "uniform_average"
    include_self: bool = True
    fetch_timeout_ms: int = 2000
    rng_seed: int = 0
    stay_resident: bool = False
    bind: str = "127.0.0.1"
    advertise_host: str = "127.0.0.1"
    # artificial delay between logging a send and writing the body (test harness)
    link_delay_ms: int = 0

    def __post_init__(self):
        if not self.hostname:
            raise ValueError("hostname must be non-empty")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.registries:
            raise ValueError("at least one registry address is required")
        if self.fetch_timeout_ms <= 0:
            raise ValueError("fetch_timeout_ms must be positive")
        get_aggregation(self.aggregation)


def select_peers(active: list[PeerRecord], alpha: float, rng: np.random.Generator) -> list[PeerRecord]:
    """Sample ``max(floor(len(active) * alpha), 1)`` peers without replacement."""
    if not active:
        return []
    # the epsilon keeps e.g. 100 * 0.29 from flooring to 28
    m = max(math.floor(len(active) * alpha + 1e-9), 1)
    m = min(m, len(active))
    picks = rng.choice(len(active), size=m, replace=False)
    return [active[int(i)] for i in picks]


class _ModelHandler(BaseHTTPRequestHandler):
    server_version = "edgefl-peer/0.1"
    peer: "Peer"

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def do_GET(self):
        if self.path != "/latest_model":
            self._json(404, b'{"error":"no route"}')
            return
        snapshot = self.peer._snapshot
        if snapshot is None:
            self._json(404, b'{"error":"no model"}')
            return
        ws, blob = snapshot
        requester = self.headers.get(HEADER_REQUESTER)
        if requester:
            try:
                rnd = int(self.headers.get(HEADER_ROUND, "0"))
            except ValueError:
                rnd = 0
            self.peer._log("send", rnd, counterpart=requester, payload_version=ws.version)
        if self.peer.config.link_delay_ms:
            time.sleep(self.peer.config.link_delay_ms / 1000)
        self.send_response(200)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header(HEADER_VERSION, str(ws.version))
        self.send_header(HEADER_PRODUCER, ws.producer)
        self.end_headers()
        self.wfile.write(blob)

    def _json(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class Peer:
    """Handle for one edge node: lifecycle, model serving and aggregation."""

    def __init__(self, config: PeerConfig, events: EventLog | None = None):
        self.config = config
        self.events = events if events is not None else EventLog()
        self.state = "created"
        self.registry = RegistryClient(config.registries, timeout_s=config.fetch_timeout_ms / 1000)
        self.combine = get_aggregation(config.aggregation)
        self.current_round = 0
        self.last_fetched_from: list[str] = []
        self._rng = np.random.default_rng(config.rng_seed)
        # (WeightSet, serialized bytes) swapped as one reference
        self._snapshot: tuple[WeightSet, bytes] | None = None
        self._publish_lock = threading.Lock()
        self._server = None
        self._thread: threading.Thread | None = None

    @property
    def hostname(self) -> str:
        return self.config.hostname

    @property
    def address(self) -> str:
        return f"{self.config.advertise_host}:{self.port}"

    @property
    def port(self) -> int:
        if self._server is None:
            raise NotStarted("peer is not serving")
        return self._server.server_address[1]

    @property
    def serving(self) -> bool:
        return self._server is not None

    @property
    def latest_published(self) -> WeightSet | None:
        snap = self._snapshot
        return snap[0] if snap else None

    def _log(self, kind: str, rnd: int, **fields) -> None:
        self.events.record(self.hostname, rnd, kind, **fields)

    # lifecycle

    def start(self) -> None:
        if self.state != "created":
            raise RuntimeError(f"cannot start a peer in state {self.state!r}")
        handler = type("Handler", (_ModelHandler,), {"peer": self})
        self._server = bind_server(handler, self.config.bind, self.config.serve_port)
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": POLL_S},
            name=f"serve-{self.hostname}", daemon=True,
        )
        self._thread.start()
        try:
            self.registry.register(self.hostname, self.address)
        except NoRegistryReachable:
            self._stop_serving()
            raise
        self.state = "started"

    def unregister_peer(self) -> None:
        if self.state == "created":
            raise NotStarted("peer was never started")
        if self.state == "left":
            return
        try:
            self.registry.unregister(self.hostname)
        except NoRegistryReachable as exc:
            log.warning("%s: could not reach any registry to unregister: %s", self.hostname, exc)
        self.state = "left"
        if not self.config.stay_resident:
            self._stop_serving()

    def stop(self) -> None:
        """Leave (if still registered) and shut the serving endpoint down."""
        if self.state == "started":
            self.unregister_peer()
        self._stop_serving()

    def _stop_serving(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    # serving

    def publish(self, w: WeightSet, round: int | None = None) -> WeightSet:
        """Make ``w`` the served model; returns the stamped copy."""
        if not self.serving:
            raise NotStarted("publish() needs a started peer")
        with self._publish_lock:
            prev = self.latest_published
            version = w.version if prev is None else max(w.version, prev.version + 1)
            stamped = w.with_meta(
                version=version, producer=self.hostname, produced_at=int(time.time() * 1000)
            )
            self._snapshot = (stamped, serialize(stamped))
        self._log("deploy", self.current_round if round is None else round,
                  payload_version=stamped.version)
        return stamped

    def serve_latest_model(self) -> bytes:
        if not self.serving:
            raise NotStarted("peer is not serving")
        snap = self._snapshot
        if snap is None:
            raise NoModelYet(f"{self.hostname} has not published a model")
        return snap[1]

    # aggregation

    def _fetch(self, record: PeerRecord, rnd: int) -> WeightSet | None:
        req = urllib.request.Request(
            f"{record.url}/latest_model",
            headers={HEADER_REQUESTER: self.hostname, HEADER_ROUND: str(rnd)},
        )
        try:
            with OPENER.open(req, timeout=self.config.fetch_timeout_ms / 1000) as resp:
                blob = resp.read()
            received_at = now_ms()
        except urllib.error.HTTPError as exc:
            log.debug("%s: %s answered %s", self.hostname, record.hostname, exc.code)
            return None
        except (OSError, urllib.error.URLError) as exc:
            log.debug("%s: fetch from %s failed: %s", self.hostname, record.hostname, exc)
            return None
        try:
            ws = deserialize(blob)
        except (FormatError, UnicodeDecodeError) as exc:
            log.warning("%s: undecodable model from %s: %s", self.hostname, record.hostname, exc)
            return None
        self._log("receive", rnd, timestamp_ms=received_at, counterpart=record.hostname,
                  payload_version=ws.version)
        return ws

    def aggregation_func(self, round: int | None = None) -> WeightSet:
        """Pull models from a random subset of active peers and combine them."""
        if self.state != "started":
            raise NotStarted("aggregation_func() needs a started peer")
        rnd = self.current_round if round is None else round
        try:
            active = self.registry.peers()
        except NoRegistryReachable as exc:
            log.warning("%s: registry unreachable, aggregating alone: %s", self.hostname, exc)
            active = []
        others = [r for r in active if r.hostname != self.hostname]
        selected = select_peers(others, self.config.alpha, self._rng)

        fetched: list[WeightSet] = []
        sources: list[str] = []
        if selected:
            workers = min(MAX_PARALLEL_FETCHES, len(selected))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda rec: self._fetch(rec, rnd), selected))
            for rec, ws in zip(selected, results):
                if ws is not None:
                    fetched.append(ws)
                    sources.append(rec.hostname)
        self.last_fetched_from = sources

        own = self.latest_published
        if not fetched:
            if own is None:
                raise NoPeersAvailable(f"{self.hostname}: no models fetched and none of its own")
            return own
        combined = self.combine(own if self.config.include_self else None, fetched)
        return combined.with_meta(producer=self.hostname)

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()


@dataclass
class RoundSummary:
    round: int
    fetched_from: list[str]
    aggregated: WeightSet
    trained: WeightSet | None = None
    accuracy: float | None = None


class RoundRunner:
    """One peer's round loop, split into phases so a driver can interleave barriers."""

    def __init__(self, peer: Peer, train: Dataset, test: Dataset | None, model: ModelSpec,
                 cfg: TrainConfig, checkpoint_dir=None):
        self.peer = peer
        self.train = train
        self.test = test
        self.model = model
        self.cfg = cfg
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        if self.checkpoint_dir:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        self.summaries: list[RoundSummary] = []
        self._pending: RoundSummary | None = None

    def aggregate(self, rnd: int) -> WeightSet:
        self.peer.current_round = rnd
        try:
            w = self.peer.aggregation_func(rnd)
        except NoPeersAvailable:
            w = init_weights(self.model)
            self.peer.last_fetched_from = []
        self._pending = RoundSummary(rnd, list(self.peer.last_fetched_from), w)
        if self.checkpoint_dir:
            save(w, self.checkpoint_dir / f"aggregated-{rnd:04d}.efl")
        return w

    def train_and_publish(self, rnd: int) -> RoundSummary:
        summary = self._pending
        if summary is None or summary.round != rnd:
            raise RuntimeError(f"round {rnd}: aggregate() must run first")
        self.peer._log("train_start", rnd)
        trained = node_training(summary.aggregated, self.train, self.cfg)
        summary.trained = self.peer.publish(trained, round=rnd)
        if self.checkpoint_dir:
            save(summary.trained, self.checkpoint_dir / f"trained-{rnd:04d}.efl")
        if self.test is not None and len(self.test):
            summary.accuracy = evaluate(summary.trained, self.test)
            self.peer._log("evaluate", rnd, accuracy=summary.accuracy,
                           payload_version=summary.trained.version)
        self.summaries.append(summary)
        self._pending = None
        return summary

    def run_round(self, rnd: int) -> RoundSummary:
        self.aggregate(rnd)
        return self.train_and_publish(rnd)


def run_rounds(peer: Peer, data: Dataset, model: ModelSpec, cfg: TrainConfig, rounds: int, *,
               test: Dataset | None = None, start_round: int = 1,
               round_interval_ms: int | None = None, checkpoint_dir=None,
               should_stop=None) -> list[RoundSummary]:
    """Free-running loop: aggregate, train, publish, evaluate, once per round.

    With ``round_interval_ms`` each round starts on a fixed schedule
    (sleeping when a round finishes early).
    """
    runner = RoundRunner(peer, data, test, model, cfg, checkpoint_dir)
    t0 = time.monotonic()
    for i, rnd in enumerate(range(start_round, start_round + rounds)):
        if round_interval_ms:
            delay = t0 + i * round_interval_ms / 1000 - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        if should_stop is not None and should_stop():
            break
        runner.run_round(rnd)
    return runner.summaries
