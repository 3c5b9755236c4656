"""FedAvg, FedSGD and FedAvgen aggregation behind one dispatcher."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, EmptyPopulation, PayloadError
from .evolution import EvolutionConfig, FitnessWeights, GenerationStats, Phenotype, run_generations
from .metrics import Genotype, MetricConfig, genotype_of
from .weights import axpy_combine


class PayloadKind(str, enum.Enum):
    WEIGHTS = "weights"
    GRADIENTS = "gradients"


class StrategyKind(str, enum.Enum):
    FEDAVG = "fedavg"
    FEDSGD = "fedsgd"
    FEDAVGEN = "fedavgen"


@dataclass
class ClientUpdate:
    client_id: str
    payload: np.ndarray
    kind: PayloadKind = PayloadKind.WEIGHTS
    num_samples: int = 1
    local_loss: float = 0.0
    genotype: Optional[Genotype] = None

    def __post_init__(self):
        self.kind = PayloadKind(self.kind)
        self.payload = np.asarray(self.payload, dtype=np.float64).reshape(-1)
        if int(self.num_samples) < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind = StrategyKind.FEDAVG
    participation_fraction: float = 1.0
    server_learning_rate: float = 1.0
    evolution: Optional[EvolutionConfig] = None
    fitness_weights: Optional[FitnessWeights] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if not 0.0 < self.participation_fraction <= 1.0:
            raise ConfigError(f"participation_fraction must be in (0, 1], got {self.participation_fraction}")
        if not self.server_learning_rate > 0:
            raise ConfigError("server_learning_rate must be positive")
        is_gen = self.kind is StrategyKind.FEDAVGEN
        has_gen = self.evolution is not None and self.fitness_weights is not None
        if is_gen != has_gen:
            raise ConfigError("evolution and fitness_weights are required for fedavgen and only for fedavgen")


@dataclass
class AggregateResult:
    weights: np.ndarray
    server_macs: int
    generations: list[GenerationStats] = field(default_factory=list)


def size_fraction(updates: Sequence[ClientUpdate]) -> np.ndarray:
    """Default importance rule: each client's share of the total sample count."""
    n = np.array([u.num_samples for u in updates], dtype=np.float64)
    return n / n.sum()


ImportanceRule = Callable[[Sequence[ClientUpdate]], np.ndarray]


def sample_participants(clients: Sequence[str], tau: float, rng: np.random.Generator) -> list[str]:
    """Draw ``ceil(tau * N)`` distinct ids uniformly, returned in input order."""
    if len(clients) == 0:
        raise EmptyPopulation("no clients to sample from")
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"participation fraction must be in (0, 1], got {tau}")
    n = len(clients)
    k = max(1, min(n, math.ceil(round(tau * n, 9))))
    if k == n:
        return list(clients)
    picked = rng.choice(n, size=k, replace=False)
    return [clients[i] for i in sorted(int(i) for i in picked)]


def _require(updates: Sequence[ClientUpdate], kind: PayloadKind) -> int:
    if len(updates) == 0:
        raise EmptyPopulation("no client updates")
    bad = [u.client_id for u in updates if u.kind is not kind]
    if bad:
        raise PayloadError(f"expected {kind.value} payloads; got other kinds from {bad}")
    lengths = {u.payload.size for u in updates}
    if len(lengths) != 1:
        raise DimensionError(f"update lengths differ: {sorted(lengths)}")
    return lengths.pop()


def fedavg_aggregate(updates: Sequence[ClientUpdate], importance: ImportanceRule = size_fraction) -> np.ndarray:
    _require(updates, PayloadKind.WEIGHTS)
    return axpy_combine(importance(updates), [u.payload for u in updates])


def fedsgd_aggregate(updates: Sequence[ClientUpdate], global_weights, lr: float,
                     importance: ImportanceRule = size_fraction) -> np.ndarray:
    length = _require(updates, PayloadKind.GRADIENTS)
    g0 = np.asarray(global_weights, dtype=np.float64).reshape(-1)
    if g0.size != length:
        raise DimensionError(f"gradient length {length} does not match global model {g0.size}")
    grad = axpy_combine(importance(updates), [u.payload for u in updates])
    return g0 - lr * grad


def updates_to_population(updates: Sequence[ClientUpdate], metric_cfg: MetricConfig) -> list[Phenotype]:
    pop = []
    for u in updates:
        g = u.genotype if u.genotype is not None else genotype_of(u.payload, None, metric_cfg)
        pop.append(Phenotype(id=u.client_id, weights=u.payload, genotype=g, num_samples=u.num_samples))
    return pop


def _fedavgen(updates, cfg: StrategyConfig, metric_cfg, rng) -> AggregateResult:
    _require(updates, PayloadKind.WEIGHTS)
    pop = updates_to_population(updates, metric_cfg)
    _, global_model, history = run_generations(pop, cfg.evolution, cfg.fitness_weights, metric_cfg, rng)
    macs = sum(s.server_macs for s in history)
    return AggregateResult(global_model, macs, history)


def fedavgen_aggregate(updates: Sequence[ClientUpdate], cfg: StrategyConfig,
                       metric_cfg: MetricConfig, rng: np.random.Generator) -> np.ndarray:
    """Evolve the client models and return the fitness-weighted elite average."""
    return _fedavgen(updates, cfg, metric_cfg, rng).weights


def aggregate(
    cfg: StrategyConfig,
    updates: Sequence[ClientUpdate],
    global_weights,
    metric_cfg: MetricConfig,
    rng: np.random.Generator,
) -> AggregateResult:
    """Dispatch on ``cfg.kind``; updates are sorted by client id first."""
    updates = sorted(updates, key=lambda u: u.client_id)
    if not updates:
        raise EmptyPopulation("no client updates")
    length = updates[0].payload.size
    if cfg.kind is StrategyKind.FEDAVG:
        return AggregateResult(fedavg_aggregate(updates), len(updates) * length)
    if cfg.kind is StrategyKind.FEDSGD:
        new = fedsgd_aggregate(updates, global_weights, cfg.server_learning_rate)
        return AggregateResult(new, (len(updates) + 1) * length)
    return _fedavgen(updates, cfg, metric_cfg, rng)
