import json
import threading
import urllib.error
import urllib.request

import pytest
from hypothesis import given, settings

from edgefl.errors import BadRequest, NoRegistryReachable, PortInUse
from edgefl.registry import OPENER, Registry, RegistryClient, RegistryServer, parse_address

from oracles import registry_oracle
from strategies import registry_ops as ops

@pytest.fixture
def server():
    with RegistryServer(port=0) as srv:
        yield srv


def test_fresh_registry_is_empty(server):
    assert RegistryClient([server.url]).peers() == []


def test_register_and_sorting(server):
    client = RegistryClient([server.url])
    client.register("n2", "127.0.0.1:7002")
    client.register("n1", "127.0.0.1:7001")
    peers = client.peers()
    assert [p.hostname for p in peers] == ["n1", "n2"]
    assert peers[0].address == "127.0.0.1:7001"
    assert peers[0].registered_at > 0


def test_reregister_overwrites(server):
    client = RegistryClient([server.url])
    client.register("n1", "127.0.0.1:7001")
    client.register("n1", "127.0.0.1:7009")
    assert [(p.hostname, p.address) for p in client.peers()] == [("n1", "127.0.0.1:7009")]


def test_unregister_and_ghost(server):
    client = RegistryClient([server.url])
    client.register("n1", "127.0.0.1:7001")
    client.unregister("n1")
    client.unregister("ghost")
    assert client.peers() == []


def test_bad_requests(server):
    client = RegistryClient([server.url])
    with pytest.raises(BadRequest):
        client.register("", "127.0.0.1:1")
    with pytest.raises(BadRequest):
        client.register("n1", "no-port")
    with pytest.raises(BadRequest):
        client.register("n1", "127.0.0.1:70000")
    with pytest.raises(BadRequest):
        client.unregister("")
    req = urllib.request.Request(server.url + "/register", data=b"{not json", method="POST")
    with pytest.raises(urllib.error.HTTPError) as info:
        OPENER.open(req, timeout=2)
    assert info.value.code == 400
    assert "error" in json.loads(info.value.read())


def test_unknown_route_is_404(server):
    with pytest.raises(urllib.error.HTTPError) as info:
        OPENER.open(server.url + "/nope", timeout=2)
    assert info.value.code == 404


def test_parse_address():
    assert parse_address("10.0.0.1:8080") == ("10.0.0.1", 8080)
    assert parse_address("[::1]:80") == ("[::1]", 80)
    for bad in ("", ":80", "host:", "host:0", "host:x"):
        with pytest.raises(BadRequest):
            parse_address(bad)


def test_fifty_concurrent_registrations(server):
    client = RegistryClient([server.url], timeout_s=10)
    threads = [
        threading.Thread(target=client.register, args=(f"n{i:02d}", f"127.0.0.1:{7000 + i}"))
        for i in range(50)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    peers = client.peers()
    assert [p.hostname for p in peers] == sorted(f"n{i:02d}" for i in range(50))


def test_falls_back_to_next_registry(server):
    dead = RegistryServer(port=0)
    dead_url = dead.url
    dead.stop()
    client = RegistryClient([dead_url, server.url], timeout_s=1)
    client.register("n1", "127.0.0.1:7001")
    assert [p.hostname for p in RegistryClient([server.url]).peers()] == ["n1"]


def test_no_registry_reachable():
    dead = RegistryServer(port=0)
    url = dead.url
    dead.stop()
    with pytest.raises(NoRegistryReachable):
        RegistryClient([url], timeout_s=0.5).peers()


def test_port_in_use(server):
    with pytest.raises(PortInUse):
        RegistryServer(port=server.port)


@settings(max_examples=1000, deadline=None)
@given(ops)
def test_model_based_against_sequential_oracle(sequence):
    registry = Registry()
    for op, host, port in sequence:
        if op == "register":
            registry.register(host, f"127.0.0.1:{port}")
        else:
            registry.unregister(host)
    got = {p.hostname: p.address for p in registry.peers()}
    assert got == registry_oracle(sequence)
    assert [p.hostname for p in registry.peers()] == sorted(got)


@settings(max_examples=25, deadline=None)
@given(ops)
def test_model_based_over_http(sequence):
    with RegistryServer(port=0) as srv:
        client = RegistryClient([srv.url])
        for op, host, port in sequence:
            if op == "register":
                client.register(host, f"127.0.0.1:{port}")
            else:
                client.unregister(host)
        assert {p.hostname: p.address for p in client.peers()} == registry_oracle(sequence)


def test_concurrent_interleaving_matches_some_replay():
    # each writer owns one hostname, so the final state is determined by each
    # writer's last operation regardless of how threads interleave
    registry = Registry()
    scripts = {
        f"w{i}": [("register" if (i + j) % 3 else "unregister", f"w{i}", 1000 + j) for j in range(200)]
        for i in range(8)
    }

    def run(script):
        for op, host, port in script:
            if op == "register":
                registry.register(host, f"127.0.0.1:{port}")
            else:
                registry.unregister(host)

    threads = [threading.Thread(target=run, args=(s,)) for s in scripts.values()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    expected = {}
    for script in scripts.values():
        expected.update(registry_oracle(script))
    assert {p.hostname: p.address for p in registry.peers()} == expected


def test_snapshots_never_partial():
    registry = Registry()
    stop = threading.Event()
    bad = []

    def writer():
        i = 0
        while not stop.is_set():
            registry.register(f"n{i % 20}", f"127.0.0.1:{1 + i % 60000}")
            registry.unregister(f"n{(i + 7) % 20}")
            i += 1

    def reader():
        while not stop.is_set():
            snap = registry.peers()
            names = [p.hostname for p in snap]
            if names != sorted(set(names)):
                bad.append(names)
            for p in snap:
                if not p.hostname or ":" not in p.address or p.registered_at <= 0:
                    bad.append(p)

    threads = [threading.Thread(target=writer) for _ in range(3)] + [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    threading.Event().wait(0.5)
    stop.set()
    for t in threads:
        t.join()
    assert bad == []
