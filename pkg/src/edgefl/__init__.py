"""Serverless federated learning: edge peers that discover each other through
a registration node, pull each other's weights, and average them locally."""

from .aggregation import available_aggregations, get_aggregation, register_aggregation
from .fedavg import FedAvgConfig, FedAvgRound, run_fedavg
from .metrics import (
    EventLog,
    RoundEvent,
    classification_report,
    model_evolution_time,
    weights_update_latency,
)
from .partition import (
    PartitionPlan,
    generate_blobs,
    load_idx,
    local_split,
    partition_normal,
    partition_uniform,
)
from .orchestrator import DataSpec, ExperimentConfig, load_config, run_comparison, run_experiment
from .peer import Peer, PeerConfig, RoundRunner, run_rounds, select_peers
from .registry import PeerRecord, Registry, RegistryClient, RegistryServer
from .trainer import (
    Dataset,
    ModelSpec,
    TrainConfig,
    evaluate,
    init_weights,
    loss_and_grad,
    node_training,
)
from .weights import WeightSet, average, deserialize, serialize

__version__ = "0.1.0"

__all__ = [
    "available_aggregations", "get_aggregation", "register_aggregation",
    "FedAvgConfig", "FedAvgRound", "run_fedavg",
    "EventLog", "RoundEvent", "classification_report", "model_evolution_time", "weights_update_latency",
    "DataSpec", "ExperimentConfig", "load_config", "run_comparison", "run_experiment",
    "PartitionPlan", "generate_blobs", "load_idx", "local_split", "partition_normal", "partition_uniform",
    "Peer", "PeerConfig", "RoundRunner", "run_rounds", "select_peers",
    "PeerRecord", "Registry", "RegistryClient", "RegistryServer",
    "Dataset", "ModelSpec", "TrainConfig", "evaluate", "init_weights", "loss_and_grad", "node_training",
    "WeightSet", "average", "deserialize", "serialize",
]
