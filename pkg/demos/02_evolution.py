"""
Elitist evolution of a weight population
========================================

Ranks a random population by fitness, keeps the elites, breeds offspring and
tracks the best fitness over several generations.
"""

import numpy as np

from fedlab.evolution import (
    EvolutionConfig,
    FitnessWeights,
    Phenotype,
    elite_coefficients,
    evolve,
    rank_population,
    select_elites,
)
from fedlab.metrics import MetricConfig, genotype_of
from fedlab.weights import make_rng

rng = np.random.default_rng(0)
metric_cfg = MetricConfig()
fw = FitnessWeights(0.5, 0.3, 0.2)

# thirty "pre-trained" models with a noisy previous snapshot each
pop = []
for i in range(30):
    w = rng.normal(0, 0.1 + 0.05 * (i % 4), 64)
    prev = w + rng.normal(0, 0.01 * (1 + i % 5), 64)
    pop.append(Phenotype(f"model-{i:02d}", w, genotype_of(w, prev, metric_cfg)))

alpha = rank_population(pop, fw)
print("top five by fitness:")
for i in alpha[:5]:
    p = pop[i]
    print(f"  {p.id}  F={p.fitness:.4f}  zeta={p.genotype.sparsity:.3f}  "
          f"rho={p.genotype.stability:.4f}  eta={p.genotype.health:.3f}")

# two elites, weighted by their share of the elite fitness
cfg = EvolutionConfig(elite_rate=2, mutation_rate=0.01, mutation_noise_scale=0.01)
elites = select_elites(pop, alpha, cfg)
print("elite coefficients:", np.round(elite_coefficients(elites, fw), 4))

# elitism keeps the best fitness from ever dropping
gen_rng = make_rng(7)
for gen in range(8):
    pop, global_w, stats = evolve(pop, cfg, fw, metric_cfg, gen_rng, generation=gen)
    print(f"generation {gen}: best {stats.best_fitness:.4f}  mean {stats.mean_fitness:.4f}  "
          f"elites {stats.elite_ids}")
