"""Elitist genetic aggregation over a population of models.

Each model (phenotype) carries its weight vector and a genotype of weight-space
metrics. One generation scores every phenotype, keeps the elites unchanged,
breeds the rest of the population from elite pairs by uniform crossover plus
masked uniform-noise mutation, and returns the fitness-weighted average of the
elites as the global model.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DegenerateFitness, DimensionError, EmptyPopulation, StateError
from .metrics import Genotype, MetricConfig, genotype_of
from .weights import axpy_combine

log = logging.getLogger(__name__)

# |health| floor for the literal 1/health term
LITERAL_HEALTH_GUARD = 1e-6


class HealthMode(str, enum.Enum):
    BOUNDED = "bounded"
    LITERAL = "literal"


@dataclass
class Phenotype:
    id: str
    weights: np.ndarray
    genotype: Optional[Genotype] = None
    fitness: Optional[float] = None
    num_samples: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class FitnessWeights:
    """Coefficients of the sparsity, stability and health terms."""

    epsilon: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2
    health_term_mode: HealthMode = HealthMode.BOUNDED

    def __post_init__(self):
        object.__setattr__(self, "health_term_mode", HealthMode(self.health_term_mode))
        if min(self.epsilon, self.beta, self.gamma) < 0:
            raise ConfigError("fitness coefficients must be non-negative")
        if not (self.epsilon >= self.beta >= self.gamma):
            raise ConfigError(
                "fitness coefficients must be non-increasing: "
                f"epsilon={self.epsilon}, beta={self.beta}, gamma={self.gamma}"
            )
        if self.epsilon + self.beta + self.gamma <= 0:
            raise ConfigError("fitness coefficients must not all be zero")


@dataclass(frozen=True)
class EvolutionConfig:
    """GA settings.

    ``elite_rate`` is an absolute count when given as an ``int`` (or an
    integral float above 1) and a fraction of the population when it is a
    float in (0, 1].
    """

    elite_rate: Union[int, float] = 2
    mutation_rate: float = 0.01
    mutation_noise_scale: float = 0.01
    generations: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        rate = self.elite_rate
        if isinstance(rate, bool) or not isinstance(rate, (int, float)):
            raise ConfigError(f"elite_rate must be a number, got {rate!r}")
        if isinstance(rate, int):
            if rate < 1:
                raise ConfigError(f"elite count must be >= 1, got {rate}")
        elif not (0 < rate <= 1 or (rate > 1 and float(rate).is_integer())):
            raise ConfigError(f"elite_rate must be in (0, 1] or a whole count, got {rate}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if not self.mutation_noise_scale > 0:
            raise ConfigError("mutation_noise_scale must be positive")
        if int(self.generations) < 1:
            raise ConfigError("generations must be >= 1")

    def elite_count(self, population_size: int) -> int:
        if population_size < 1:
            raise EmptyPopulation("population is empty")
        rate = self.elite_rate
        if isinstance(rate, int) or rate > 1:
            count = int(rate)
        else:
            # guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4
            count = math.ceil(round(rate * population_size, 9))
        return max(1, min(count, population_size))


@dataclass
class GenerationStats:
    best_fitness: float
    mean_fitness: float
    elite_ids: list[str]
    coefficients: list[float]
    degenerate: bool = False
    # multiply-accumulate estimate of the server-side work for this generation
    server_macs: int = 0


def fitness(p: Phenotype, fw: FitnessWeights = FitnessWeights()) -> float:
    g = p.genotype
    if g is None:
        raise StateError(f"phenotype {p.id!r} has no genotype")
    base = fw.epsilon * (1.0 - g.sparsity) + fw.beta * g.stability
    if fw.health_term_mode is HealthMode.BOUNDED:
        # monotone increasing in health, in (0, gamma] for health <= 0
        return base + fw.gamma / (1.0 - g.health)
    eta = g.health
    if abs(eta) < LITERAL_HEALTH_GUARD:
        eta = -LITERAL_HEALTH_GUARD
    return base + fw.gamma * (1.0 / eta)


def score_population(pop: Sequence[Phenotype], fw: FitnessWeights) -> list[float]:
    """Compute and store the fitness of every phenotype."""
    scores = []
    for p in pop:
        p.fitness = fitness(p, fw)
        if not math.isfinite(p.fitness):
            raise StateError(f"non-finite fitness for {p.id!r}")
        scores.append(p.fitness)
    return scores


def rank_population(pop: Sequence[Phenotype], fw: FitnessWeights = FitnessWeights()) -> list[int]:
    """Indices of ``pop`` by decreasing fitness, ties broken by ascending id."""
    if len(pop) == 0:
        raise StateError("cannot rank an empty population")
    scores = score_population(pop, fw)
    return sorted(range(len(pop)), key=lambda i: (-scores[i], pop[i].id, i))


def select_elites(pop: Sequence[Phenotype], alpha: Sequence[int], cfg: EvolutionConfig) -> list[Phenotype]:
    return [pop[i] for i in alpha[: cfg.elite_count(len(pop))]]


def uniform_crossover(parent_a: Phenotype, parent_b: Phenotype, rng: np.random.Generator) -> np.ndarray:
    a, b = parent_a.weights, parent_b.weights
    if a.size != b.size:
        raise DimensionError(f"parents differ in length ({a.size} vs {b.size})")
    take_b = rng.random(a.size) < 0.5
    return np.where(take_b, b, a)


def mutate(
    w,
    cfg: EvolutionConfig,
    metric_cfg: MetricConfig = MetricConfig(),
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Add U(-scale, scale) noise to each coordinate with probability ``mutation_rate``.

    The zero mask is restored afterwards: coordinates that were near zero are
    set to exactly 0, and nonzero coordinates that the noise pushed into the
    zero band keep their old value. The Hamming weight is therefore unchanged.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if cfg.mutation_rate == 0.0:
        return w.copy()
    if rng is None:
        raise StateError("mutate needs an rng when mutation_rate > 0")
    tol = metric_cfg.zero_tolerance
    zero = np.abs(w) <= tol
    hit = rng.random(w.size) < cfg.mutation_rate
    noise = rng.uniform(-cfg.mutation_noise_scale, cfg.mutation_noise_scale, w.size)
    out = np.where(hit, w + noise, w)
    collapsed = ~zero & (np.abs(out) <= tol)
    out[collapsed] = w[collapsed]
    out[zero] = 0.0
    return out


def elite_coefficients(elites: Sequence[Phenotype], fw: FitnessWeights = FitnessWeights()) -> np.ndarray:
    """Normalised fitness shares ``F_i / sum_j F_j`` of the elite set."""
    if len(elites) == 0:
        raise EmptyPopulation("elite set is empty")
    scores = np.array([p.fitness if p.fitness is not None else fitness(p, fw) for p in elites])
    total = scores.sum()
    if total == 0.0 or not math.isfinite(total):
        raise DegenerateFitness(f"elite fitness sum is {total}")
    return scores / total


def aggregate_elites(elites: Sequence[Phenotype], fw: FitnessWeights = FitnessWeights()) -> np.ndarray:
    coeffs = elite_coefficients(elites, fw)
    return axpy_combine(coeffs, [p.weights for p in elites])


def _offspring_genotype(child: np.ndarray, parent: Phenotype, metric_cfg: MetricConfig) -> Genotype:
    meta = {}
    if parent.genotype is not None:
        g = parent.genotype
        meta = dict(epochs_trained=g.epochs_trained, learning_rate=g.learning_rate, batch_size=g.batch_size)
    return genotype_of(child, parent.weights, metric_cfg, meta)


def evolve(
    pop: Sequence[Phenotype],
    cfg: EvolutionConfig,
    fw: FitnessWeights,
    metric_cfg: MetricConfig,
    rng: np.random.Generator,
    generation: int = 0,
) -> tuple[list[Phenotype], np.ndarray, GenerationStats]:
    """Run one generation; returns ``(next_pop, global_model, stats)``."""
    if len(pop) == 0:
        raise EmptyPopulation("cannot evolve an empty population")
    n = len(pop)
    length = pop[0].weights.size
    if any(p.weights.size != length for p in pop):
        raise DimensionError("population members differ in length")

    alpha = rank_population(pop, fw)
    elites = select_elites(pop, alpha, cfg)
    scores = [p.fitness for p in pop]

    next_pop: list[Phenotype] = list(elites)
    k = 0
    while len(next_pop) < n:
        if len(elites) >= 2:
            i, j = rng.choice(len(elites), size=2, replace=False)
        else:
            i = j = 0
        pa, pb = elites[int(i)], elites[int(j)]
        child = mutate(uniform_crossover(pa, pb, rng), cfg, metric_cfg, rng)
        offspring = Phenotype(
            id=f"g{generation:03d}-c{k:03d}",
            weights=child,
            genotype=_offspring_genotype(child, pa, metric_cfg),
            num_samples=pa.num_samples,
        )
        offspring.fitness = fitness(offspring, fw)
        next_pop.append(offspring)
        k += 1

    degenerate = False
    try:
        coeffs = elite_coefficients(elites, fw)
        global_model = axpy_combine(coeffs, [p.weights for p in elites])
    except DegenerateFitness as exc:
        log.warning("DegenerateFitness (%s); falling back to the unweighted elite mean", exc)
        degenerate = True
        coeffs = np.full(len(elites), 1.0 / len(elites))
        global_model = axpy_combine(coeffs, [p.weights for p in elites])

    # crossover + mutation + three metrics per child (~4 passes), one pass per elite
    macs = k * 4 * length + len(elites) * length
    stats = GenerationStats(
        best_fitness=max(scores),
        mean_fitness=float(np.mean(scores)),
        elite_ids=[p.id for p in elites],
        coefficients=[float(c) for c in coeffs],
        degenerate=degenerate,
        server_macs=macs,
    )
    return next_pop, global_model, stats


def run_generations(
    pop: Sequence[Phenotype],
    cfg: EvolutionConfig,
    fw: FitnessWeights,
    metric_cfg: MetricConfig,
    rng: np.random.Generator,
) -> tuple[list[Phenotype], np.ndarray, list[GenerationStats]]:
    """Evolve for ``cfg.generations`` generations; the last global model wins."""
    history = []
    current = list(pop)
    global_model = None
    for gen in range(int(cfg.generations)):
        current, global_model, stats = evolve(current, cfg, fw, metric_cfg, rng, generation=gen)
        history.append(stats)
    return current, global_model, history


def with_genotypes(pop: Sequence[Phenotype], metric_cfg: MetricConfig) -> list[Phenotype]:
    """Fill in missing genotypes from the weights alone."""
    return [p if p.genotype is not None else replace(p, genotype=genotype_of(p.weights, None, metric_cfg)) for p in pop]
