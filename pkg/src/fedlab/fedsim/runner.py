"""Round loop: client work, aggregation, broadcast, evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import ExperimentConfig
from ..strategies import StrategyKind, aggregate, sample_participants
from ..weights import child_rng, child_seed, make_rng
from .client import ClientState, evaluate, local_gradient, local_train
from .data import SyntheticDataset, generate_federation
from .mlp import MlpModel

# stream indices below the per-client range (clients use 1000 + i)
_INIT_STREAM = 1
_SERVER_STREAM = 2
_CLIENT_STREAM_BASE = 1000


@dataclass
class RoundRecord:
    round: int
    strategy: str
    accuracy: float
    loss: float
    client_macs: dict = field(default_factory=dict)
    server_macs: int = 0
    wall_seconds: float = 0.0
    participants: list = field(default_factory=list)

    @property
    def total_client_macs(self) -> int:
        return int(sum(self.client_macs.values()))


@dataclass
class Federation:
    shards: list
    holdout: SyntheticDataset
    model: MlpModel
    initial_weights: np.ndarray


def build_federation(cfg: ExperimentConfig) -> Federation:
    """Datasets and shared initial weights; identical for every strategy under one seed."""
    f = cfg.federation
    shards, holdout = generate_federation(
        f.clients, f.samples_per_client, f.dim, f.classes, f.skew, cfg.seed,
        holdout_size=f.holdout, class_sep=f.class_sep, spread=f.spread,
    )
    model = MlpModel(cfg.layer_dims)
    w0 = model.init_weights(child_rng(cfg.seed, _INIT_STREAM))
    return Federation(shards, holdout, model, w0)


def _clients(fed: Federation, seed: int) -> list[ClientState]:
    return [
        ClientState(
            client_id=f"client-{i:03d}",
            shard=shard,
            model=fed.model,
            weights=fed.initial_weights,
            rng=child_rng(seed, _CLIENT_STREAM_BASE + i),
        )
        for i, shard in enumerate(fed.shards)
    ]


def run_experiment(cfg: ExperimentConfig, strategy: Optional[str] = None,
                   federation: Optional[Federation] = None) -> list[RoundRecord]:
    """Simulate ``cfg.rounds`` rounds of one strategy (default: the first listed)."""
    kind = StrategyKind(strategy or cfg.strategies[0])
    scfg = cfg.strategy_config(kind)
    metric_cfg = cfg.metric_config()
    fed = federation or build_federation(cfg)
    clients = _clients(fed, cfg.seed)
    by_id = {c.client_id: c for c in clients}
    ids = sorted(by_id)
    server_rng = make_rng(child_seed(cfg.seed, _SERVER_STREAM))
    t = cfg.training

    global_w = fed.initial_weights.copy()
    records = []
    for r in range(cfg.rounds):
        start = time.perf_counter()
        chosen = sample_participants(ids, scfg.participation_fraction, server_rng)
        updates, client_macs = [], {}
        for cid in chosen:
            c = by_id[cid]
            before = c.mac_counter
            c.receive(global_w)
            if kind is StrategyKind.FEDSGD:
                updates.append(local_gradient(c, t.gradient_batch))
            else:
                updates.append(local_train(c, t.epochs, t.batch_size, t.lr, metric_cfg))
            client_macs[cid] = c.mac_counter - before
        result = aggregate(scfg, updates, global_w, metric_cfg, server_rng)
        global_w = result.weights
        acc, loss = evaluate(global_w, fed.model, fed.holdout)
        records.append(RoundRecord(
            round=r + 1,
            strategy=kind.value,
            accuracy=acc,
            loss=loss,
            client_macs=client_macs,
            server_macs=int(result.server_macs),
            wall_seconds=time.perf_counter() - start,
            participants=list(chosen),
        ))
    return records

