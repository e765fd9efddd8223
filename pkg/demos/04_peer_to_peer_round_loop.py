"""
Peers, a registry and the round loop
====================================

Three peers register with a registration node, then loop: pull models from
randomly chosen peers, average, train locally, publish. There is no central
server; the registry only knows who is online.
"""

from edgefl import (
    ModelSpec,
    Peer,
    PeerConfig,
    RegistryServer,
    TrainConfig,
    generate_blobs,
    init_weights,
    local_split,
    node_training,
    partition_uniform,
)
from edgefl.errors import NoPeersAvailable
from edgefl.trainer import evaluate

data = generate_blobs(n_classes=4, per_class=150, feature_dim=8, separation=4.0, seed=1)
plan = partition_uniform(data.labels, 4, 3, seed=1)
spec = ModelSpec("softmax_linear", data.feature_dim, data.class_count)
cfg = TrainConfig(batch_size=16, local_epochs=1, learning_rate=0.1)

with RegistryServer(port=0) as registry:
    peers = []
    for k in (1, 2, 3):
        peer = Peer(PeerConfig(f"node{k:02d}", registries=[registry.url], alpha=0.5, rng_seed=k))
        peer.start()  # serve /latest_model and register
        train_idx, test_idx = local_split(plan.indices_for(k), seed=0, node_id=k)
        peers.append((peer, data.subset(train_idx), data.subset(test_idx)))
    print("registered:", [r.hostname for r in registry.registry.peers()])

    for rnd in range(1, 6):
        line = []
        for peer, train, test in peers:
            try:
                w = peer.aggregation_func(rnd)  # fetch from alpha * |C| random peers
            except NoPeersAvailable:
                w = init_weights(spec)  # nobody has published yet
            w = node_training(w, train, cfg)
            peer.publish(w, round=rnd)
            line.append(f"{peer.hostname} {evaluate(w, test):.3f} (from {peer.last_fetched_from})")
        print(f"round {rnd}: " + "; ".join(line))

    for peer, _, _ in peers:
        peer.unregister_peer()
    print("after leaving:", registry.registry.peers())
