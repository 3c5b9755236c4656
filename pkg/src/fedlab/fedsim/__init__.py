"""Deterministic desk-scale federated simulation."""

from .client import ClientState, evaluate, local_gradient, local_train
from .data import SyntheticDataset, generate_federation
from .mlp import AdamState, MacCounter, MlpModel, cross_entropy, softmax
from .runner import Federation, RoundRecord, build_federation, run_experiment

__all__ = [
    "AdamState", "ClientState", "Federation", "MacCounter", "MlpModel", "RoundRecord",
    "SyntheticDataset", "build_federation", "cross_entropy", "evaluate", "generate_federation",
    "local_gradient", "local_train", "run_experiment", "softmax",
]
