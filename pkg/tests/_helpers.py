import numpy as np

from fedlab.evolution import FitnessWeights, Phenotype
from fedlab.fedsim import MlpModel
from fedlab.metrics import Genotype, MetricConfig, genotype_of


def make_phenotype(pid, weights, prev=None, cfg=MetricConfig(), **meta):
    w = np.asarray(weights, dtype=float)
    return Phenotype(pid, w, genotype_of(w, prev, cfg, meta))


def random_population(rng, n, length=6, cfg=MetricConfig()):
    pop = []
    for i in range(n):
        w = rng.normal(0, 0.3, length)
        prev = w + rng.normal(0, 0.05, length)
        pop.append(make_phenotype(f"p{i:03d}", w, prev, cfg))
    return pop


def genotype(zeta=0.0, rho=1.0, eta=0.0):
    return Genotype(sparsity=zeta, stability=rho, health=eta)


# with (eps, beta, gamma) = (1, 1, 0) and zeta = 1, fitness equals stability
SCORE_FW = FitnessWeights(1.0, 1.0, 0.0)


def pop_from_scores(scores, ids=None):
    ids = ids or [f"q{i:03d}" for i in range(len(scores))]
    return [Phenotype(pid, np.ones(2), genotype(zeta=1.0, rho=s, eta=-1.0)) for pid, s in zip(ids, scores)]


def selection_sort_order(scores, ids):
    idx = list(range(len(scores)))
    out = []
    while idx:
        best = idx[0]
        for j in idx[1:]:
            if scores[j] > scores[best] or (scores[j] == scores[best] and ids[j] < ids[best]):
                best = j
        out.append(best)
        idx.remove(best)
    return out


def finite_difference_error(model, w, x, y, h=1e-5):
    """Relative error between backprop and central differences over all coordinates."""
    _, analytic = model.loss_and_grad(w, x, y)
    numeric = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        numeric[j] = (model.loss_and_grad(w + e, x, y)[0] - model.loss_and_grad(w - e, x, y)[0]) / (2 * h)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def random_mlp_case(rng, max_dims=(8, 16, 4), batch=5):
    depth = int(rng.integers(2, len(max_dims) + 1))
    dims = [int(rng.integers(1, m + 1)) for m in max_dims[:depth]]
    dims[-1] = max(dims[-1], 2)
    model = MlpModel(dims)
    w = model.init_weights(rng) + rng.normal(0, 0.1, model.num_params)
    x = rng.normal(size=(batch, dims[0]))
    y = rng.integers(0, dims[-1], batch)
    return model, w, x, y
