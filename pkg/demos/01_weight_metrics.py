"""
Weight-space metrics on toy vectors
===================================

Sparsity, health and stability for a few hand-made weight vectors, then the
same numbers for a small network as it trains.
"""

import numpy as np

from fedlab.fedsim import ClientState, MlpModel, generate_federation, local_train
from fedlab.metrics import MetricConfig, genotype_of, sparsity, stability, weight_health
from fedlab.weights import make_rng

# a single nonzero weight is as sparse as a vector gets
print("one-hot   sparsity:", sparsity([0, 0, 5, 0]))
# equal magnitudes are as dense as it gets
print("constant  sparsity:", sparsity([0.2, -0.2, 0.2, -0.2]))
print("gaussian  sparsity:", round(sparsity(np.random.default_rng(0).normal(size=1000)), 4))

# health is 0 when the weights have mean 0 and the target spread
cfg = MetricConfig(sigma_target=0.1)
print("health at target:", weight_health([0.1, -0.1], cfg))
print("health of a shifted copy:", weight_health([0.2, 0.2], cfg))

# stability compares two consecutive snapshots
w = np.array([1.0, 2.0, 3.0])
print("stability, unchanged:", stability(w, w))
print("stability, doubled:", stability(2 * w, w))

# now watch the triple move while one client trains
shards, _ = generate_federation(1, 256, 16, 3, 0.0, seed=1)
model = MlpModel([16, 32, 3])
client = ClientState("demo", shards[0], model, model.init_weights(make_rng(1)), make_rng(2))
print("\nepoch  sparsity  stability  health")
for epoch in range(1, 6):
    update = local_train(client, 1, 32, 0.001, cfg)
    g = update.genotype
    print(f"{epoch:5d}  {g.sparsity:8.4f}  {g.stability:9.5f}  {g.health:7.3f}")

# the genotype can be computed directly from any pair of snapshots
print("\n", genotype_of(client.weights, client.prev_epoch_weights, cfg).to_dict())
