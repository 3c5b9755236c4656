"""Federated aggregation lab: FedAvg, FedSGD and elitist genetic aggregation."""

__version__ = "0.1.0"
