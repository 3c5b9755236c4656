"""Client-side work: local Adam training, gradient reporting and evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DimensionError
from ..metrics import MetricConfig, genotype_of
from ..strategies import ClientUpdate, PayloadKind
from .data import SyntheticDataset
from .mlp import AdamState, MacCounter, MlpModel, cross_entropy


@dataclass
class ClientState:
    client_id: str
    shard: SyntheticDataset
    model: MlpModel
    weights: np.ndarray
    rng: np.random.Generator
    optimizer: Optional[AdamState] = None
    prev_epoch_weights: Optional[np.ndarray] = None
    macs: MacCounter = field(default_factory=MacCounter)
    cpu_time: float = 0.0
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.optimizer is None:
            self.optimizer = AdamState.zeros(self.model.num_params)

    @property
    def mac_counter(self) -> int:
        return self.macs.total

    def receive(self, global_weights, reset_optimizer: bool = True) -> None:
        """Replace the local model with the broadcast global model."""
        w = np.asarray(global_weights, dtype=np.float64).reshape(-1)
        if w.size != self.model.num_params:
            raise DimensionError("global model does not fit the client architecture")
        self.weights = w.copy()
        self.prev_epoch_weights = None
        if reset_optimizer:
            self.optimizer = AdamState.zeros(self.model.num_params)


def local_train(
    client: ClientState,
    epochs: int,
    batch_size: int,
    lr: float,
    metric_cfg: MetricConfig = MetricConfig(),
) -> ClientUpdate:
    """Minibatch Adam on softmax cross-entropy over the client's shard.

    The weights at the start of the last epoch are kept so the reported
    stability compares the last two epoch boundaries.
    """
    start = time.process_time()
    x, y = client.shard.features, client.shard.labels
    n = len(client.shard)
    if n == 0:
        raise DimensionError(f"client {client.client_id} has an empty shard")
    w = client.weights
    epoch_losses = []
    for epoch in range(epochs):
        if epoch == epochs - 1:
            client.prev_epoch_weights = w.copy()
        order = client.rng.permutation(n)
        total, seen = 0.0, 0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            loss, grad = client.model.loss_and_grad(w, x[idx], y[idx], client.macs)
            w = client.optimizer.step(w, grad, lr)
            total += loss * idx.size
            seen += idx.size
        epoch_losses.append(total / seen)
    client.weights = w
    client.loss_history.extend(epoch_losses)

    if epoch_losses:
        final_loss = epoch_losses[-1]
    else:
        final_loss = float(client.model.loss_and_grad(w, x, y)[0])
    genotype = genotype_of(
        w,
        client.prev_epoch_weights if epochs > 0 else w,
        metric_cfg,
        dict(loss=final_loss, epochs_trained=epochs, learning_rate=lr, batch_size=batch_size),
    )
    client.cpu_time += time.process_time() - start
    return ClientUpdate(
        client_id=client.client_id,
        payload=w.copy(),
        kind=PayloadKind.WEIGHTS,
        num_samples=n,
        local_loss=final_loss,
        genotype=genotype,
    )


def local_gradient(client: ClientState, batch_size: Optional[int] = None) -> ClientUpdate:
    """Cross-entropy gradient at the client's current (global) weights.

    ``batch_size=None`` uses the whole shard; otherwise one random batch.
    No local update is applied.
    """
    start = time.process_time()
    n = len(client.shard)
    if n == 0:
        raise DimensionError(f"client {client.client_id} has an empty shard")
    if batch_size is None or batch_size >= n:
        idx = np.arange(n)
    else:
        idx = np.sort(client.rng.choice(n, size=batch_size, replace=False))
    loss, grad = client.model.loss_and_grad(
        client.weights, client.shard.features[idx], client.shard.labels[idx], client.macs
    )
    client.cpu_time += time.process_time() - start
    return ClientUpdate(
        client_id=client.client_id,
        payload=grad,
        kind=PayloadKind.GRADIENTS,
        num_samples=int(idx.size),
        local_loss=loss,
    )


def evaluate(global_weights, dims, holdout: SyntheticDataset) -> tuple[float, float]:
    """Accuracy and mean cross-entropy of ``global_weights`` on ``holdout``."""
    model = dims if isinstance(dims, MlpModel) else MlpModel(dims)
    w = np.asarray(global_weights, dtype=np.float64).reshape(-1)
    if w.size != model.num_params:
        raise DimensionError(f"expected {model.num_params} weights for {model.dims}, got {w.size}")
    logits = model.logits(w, holdout.features)
    acc = float(np.mean(np.argmax(logits, axis=1) == holdout.labels))
    return acc, cross_entropy(logits, holdout.labels)
