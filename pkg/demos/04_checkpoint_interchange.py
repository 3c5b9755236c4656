"""
Sharing checkpoints with metadata sidecars
==========================================

Writes a directory of checkpoints with sidecars, loses one sidecar, ingests
the directory back as a population and aggregates it offline.
"""

import tempfile
from pathlib import Path

import numpy as np

from fedlab.evolution import EvolutionConfig, FitnessWeights, run_generations
from fedlab.metrics import MetricConfig
from fedlab.modelio import ingest_population, read_checkpoint, sidecar_path, write_model
from fedlab.weights import make_rng

rng = np.random.default_rng(3)
workdir = Path(tempfile.mkdtemp(prefix="fedlab-demo-"))
dims = [16, 32, 3]
n_params = 16 * 32 + 32 + 32 * 3 + 3

# each vendor publishes the final weights plus the previous epoch's metrics
for i in range(12):
    w = rng.normal(0, 0.1, n_params)
    write_model(w, dims, f"vendor-{i:02d}", workdir / f"vendor-{i:02d}.ckpt",
                w_prev=w + rng.normal(0, 0.005, n_params),
                training_meta={"num_samples": 100 + 10 * i, "epochs_trained": 5})

print("files:", sorted(p.name for p in workdir.iterdir())[:4], "...")
print(sidecar_path(workdir / "vendor-00.ckpt").read_text())

# a missing sidecar is rebuilt on ingest, with stability marked as assumed
sidecar_path(workdir / "vendor-05.ckpt").unlink()
pop = ingest_population(workdir, MetricConfig())
print("ingested", len(pop), "models; vendor-05 stability assumed:", pop[5].genotype.stability_assumed)

# an assumed stability of 1.0 is the best possible value, so a model without
# history gets a head start in the ranking
print("vendor-05 stability now", pop[5].genotype.stability, "vs vendor-04", round(pop[4].genotype.stability, 4))

# one offline FedAvgen step over the shared population
cfg = EvolutionConfig(elite_rate=2, mutation_rate=0.01)
_, global_w, history = run_generations(pop, cfg, FitnessWeights(), MetricConfig(), make_rng(0))
print("elites:", history[-1].elite_ids, "coefficients:", np.round(history[-1].coefficients, 4))

out = workdir / "global.ckpt"
write_model(global_w, dims, "global", out)
w, manifest = read_checkpoint(out)
print("global checkpoint:", manifest["element_count"], "weights, checksum", manifest["checksum"])
