"""Gaussian-mixture classification tasks split across clients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..weights import child_rng, make_rng


@dataclass
class SyntheticDataset:
    features: np.ndarray  # (num_samples, dim)
    labels: np.ndarray  # (num_samples,) int64
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ConfigError("features must be (n, dim) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigError("label outside [0, num_classes)")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def _allocate(probs: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of ``probs * total`` to integers summing to ``total``."""
    raw = probs * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def _draw(centers, counts, spread, rng) -> tuple[np.ndarray, np.ndarray]:
    labels = np.repeat(np.arange(len(counts)), counts)
    feats = centers[labels] + spread * rng.standard_normal((labels.size, centers.shape[1]))
    perm = rng.permutation(labels.size)
    return feats[perm], labels[perm]


def generate_federation(
    num_clients: int,
    samples_per_client: int,
    dim: int,
    num_classes: int,
    skew: float,
    seed: int,
    *,
    holdout_size: int = 600,
    class_sep: float = 1.0,
    spread: float = 1.0,
) -> tuple[list[SyntheticDataset], SyntheticDataset]:
    """Return ``(client_shards, holdout)``.

    Client ``i`` draws labels from ``(1 - skew) * uniform + skew * onehot(i % C)``
    with deterministic per-class counts, so ``skew=0`` gives exactly balanced
    shards and ``skew=1`` gives single-class shards. The holdout is balanced and
    drawn from its own stream.
    """
    if num_clients < 1:
        raise ConfigError(f"num_clients must be >= 1, got {num_clients}")
    if samples_per_client < 1:
        raise ConfigError(f"samples_per_client must be >= 1, got {samples_per_client}")
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
    if not 0.0 <= skew <= 1.0:
        raise ConfigError(f"skew must be in [0, 1], got {skew}")
    if holdout_size < 1:
        raise ConfigError("holdout_size must be >= 1")

    centers = class_sep * make_rng(seed).standard_normal((num_classes, dim))
    uniform = np.full(num_classes, 1.0 / num_classes)

    shards = []
    for i in range(num_clients):
        onehot = np.zeros(num_classes)
        onehot[i % num_classes] = 1.0
        counts = _allocate((1.0 - skew) * uniform + skew * onehot, samples_per_client)
        x, y = _draw(centers, counts, spread, child_rng(seed, i + 1))
        shards.append(SyntheticDataset(x, y, num_classes))

    x, y = _draw(centers, _allocate(uniform, holdout_size), spread, child_rng(seed, 0))
    return shards, SyntheticDataset(x, y, num_classes)
