"""Registration node: the active peer list and its JSON-over-HTTP API.

    POST /register    {"hostname": ..., "address": "host:port"}
    POST /unregister  {"hostname": ...}
    GET  /peers       -> {"peers": [{"hostname", "address", "registered_at"}]}

The registry never contacts peers; it only stores who is active.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import BadRequest, NoRegistryReachable, PortInUse

log = logging.getLogger(__name__)

# peers and registries live on private addresses; never route via env proxies
# how often serve loops check for shutdown
POLL_S = 0.05

OPENER = urllib.request.build_opener(urllib.request.ProxyHandler({}))


@dataclass(frozen=True)
class PeerRecord:
    hostname: str
    address: str
    registered_at: int = 0

    @property
    def url(self) -> str:
        return f"http://{self.address}"


def parse_address(address: str) -> tuple[str, int]:
    if not isinstance(address, str) or ":" not in address:
        raise BadRequest(f"address must be host:port, got {address!r}")
    host, _, port = address.rpartition(":")
    if not host:
        raise BadRequest(f"address {address!r} has no host")
    try:
        port_num = int(port)
    except ValueError:
        raise BadRequest(f"address {address!r} has a non-numeric port") from None
    if not 1 <= port_num <= 65535:
        raise BadRequest(f"port {port_num} outside [1, 65535]")
    return host, port_num


class Registry:
    """In-memory active peer list; every operation holds one lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._peers: dict[str, PeerRecord] = {}

    def register(self, hostname: str, address: str) -> PeerRecord:
        if not isinstance(hostname, str) or not hostname:
            raise BadRequest("hostname must be a non-empty string")
        parse_address(address)
        record = PeerRecord(hostname, address, int(time.time() * 1000))
        with self._lock:
            self._peers[hostname] = record
        return record

    def unregister(self, hostname: str) -> None:
        if not isinstance(hostname, str) or not hostname:
            raise BadRequest("hostname must be a non-empty string")
        with self._lock:
            self._peers.pop(hostname, None)

    def peers(self) -> list[PeerRecord]:
        with self._lock:
            snapshot = list(self._peers.values())
        return sorted(snapshot, key=lambda r: r.hostname)


class _RegistryHandler(BaseHTTPRequestHandler):
    server_version = "edgefl-registry/0.1"
    registry: Registry

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _reply(self, status: int, body: dict) -> None:
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _json_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        try:
            doc = json.loads(self.rfile.read(length) or b"{}")
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise BadRequest(f"invalid JSON body: {exc}") from None
        if not isinstance(doc, dict):
            raise BadRequest("body must be a JSON object")
        return doc

    def do_POST(self):
        try:
            if self.path == "/register":
                doc = self._json_body()
                self.registry.register(doc.get("hostname"), doc.get("address"))
            elif self.path == "/unregister":
                doc = self._json_body()
                self.registry.unregister(doc.get("hostname"))
            else:
                self._reply(404, {"error": f"no route {self.path}"})
                return
        except BadRequest as exc:
            self._reply(400, {"error": str(exc)})
            return
        self._reply(200, {"status": "ok"})

    def do_GET(self):
        if self.path == "/peers":
            self._reply(200, {"peers": [asdict(r) for r in self.registry.peers()]})
        else:
            self._reply(404, {"error": f"no route {self.path}"})


class _Server(ThreadingHTTPServer):
    # the socketserver default backlog of 5 resets bursts of simultaneous joins
    request_queue_size = 128
    daemon_threads = True


def bind_server(handler_cls, bind: str, port: int) -> ThreadingHTTPServer:
    try:
        server = _Server((bind, port), handler_cls)
    except OSError as exc:
        if exc.errno in (98, 48, 10048):  # EADDRINUSE on linux / mac / windows
            raise PortInUse(f"{bind}:{port} already in use") from exc
        raise
    return server


class RegistryServer:
    """Serves a :class:`Registry` over HTTP from a background thread."""

    def __init__(self, port: int = 0, bind: str = "127.0.0.1", registry: Registry | None = None):
        self.registry = registry or Registry()
        handler = type("Handler", (_RegistryHandler,), {"registry": self.registry})
        self._server = bind_server(handler, bind, port)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host = self._server.server_address[0]
        return f"http://{host}:{self.port}"

    def start(self) -> "RegistryServer":
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": POLL_S}, name="registry", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        # shutdown() blocks unless a serve loop is running
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join(timeout=5)
            self._thread = None
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class RegistryClient:
    """Talks to an ordered list of registries, using the first that answers."""

    def __init__(self, urls: list[str], timeout_s: float = 2.0):
        if not urls:
            raise ValueError("at least one registry URL is required")
        self.urls = [u.rstrip("/") for u in urls]
        self.timeout_s = timeout_s

    def _call(self, base: str, method: str, path: str, body: dict | None = None) -> dict:
        data = None if body is None else json.dumps(body).encode("utf-8")
        req = urllib.request.Request(base + path, data=data, method=method)
        if data is not None:
            req.add_header("Content-Type", "application/json")
        try:
            with OPENER.open(req, timeout=self.timeout_s) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            if exc.code == 400:
                raise BadRequest(json.loads(exc.read() or b"{}").get("error", "bad request")) from None
            raise

    def _first(self, method: str, path: str, body: dict | None = None) -> dict:
        errors = []
        for base in self.urls:
            try:
                return self._call(base, method, path, body)
            except BadRequest:
                raise
            except (OSError, urllib.error.URLError, ValueError) as exc:
                errors.append(f"{base}: {exc}")
        raise NoRegistryReachable("; ".join(errors))

    def register(self, hostname: str, address: str) -> None:
        self._first("POST", "/register", {"hostname": hostname, "address": address})

    def unregister(self, hostname: str) -> None:
        self._first("POST", "/unregister", {"hostname": hostname})

    def peers(self) -> list[PeerRecord]:
        doc = self._first("GET", "/peers")
        return [PeerRecord(**p) for p in doc.get("peers", [])]
