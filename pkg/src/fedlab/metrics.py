"""Weight-space quality measures: sparsity, weight health and stability.

The three measures together form a model's genotype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigError, DimensionError, UndefinedMetric
from .weights import l1_norm, l2_norm

DEFAULT_SIGMA_TARGET = 0.1
DEFAULT_ZERO_TOLERANCE = 1e-8


@dataclass(frozen=True)
class MetricConfig:
    sigma_target: float = DEFAULT_SIGMA_TARGET
    # |w| <= zero_tolerance counts as a zero coordinate for Hamming-weight bookkeeping
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE

    def __post_init__(self):
        if not (self.sigma_target > 0 and math.isfinite(self.sigma_target)):
            raise ConfigError(f"sigma_target must be positive, got {self.sigma_target}")
        if not (self.zero_tolerance >= 0 and math.isfinite(self.zero_tolerance)):
            raise ConfigError(f"zero_tolerance must be >= 0, got {self.zero_tolerance}")


@dataclass(frozen=True)
class Genotype:
    """Metric triple plus the training metadata a model ships with."""

    sparsity: float
    stability: float
    health: float
    stability_assumed: bool = False
    accuracy: Optional[float] = None
    loss: Optional[float] = None
    epochs_trained: int = 0
    learning_rate: float = 0.001
    batch_size: int = 32

    def __post_init__(self):
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError(f"sparsity out of [0, 1]: {self.sparsity}")
        if self.stability > 1.0:
            raise ValueError(f"stability above 1: {self.stability}")
        if self.health > 0.0:
            raise ValueError(f"health above 0: {self.health}")
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy out of [0, 1]: {self.accuracy}")
        if self.loss is not None and self.loss < 0:
            raise ValueError(f"negative loss: {self.loss}")

    @property
    def triple(self) -> tuple[float, float, float]:
        return (self.sparsity, self.stability, self.health)

    def to_dict(self) -> dict:
        return asdict(self)


def sparsity(w) -> float:
    """Hoyer sparsity, 0 for all-equal magnitudes and 1 for a single nonzero.

    Uses the ``(sqrt(L) - l1/l2) / (sqrt(L) - 1)`` normalisation, which is the
    one that actually maps onto [0, 1].
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    n = w.size
    if n == 0:
        raise DimensionError("sparsity of an empty vector")
    if n == 1:
        raise DimensionError("sparsity needs at least two weights")
    l2 = l2_norm(w)
    if l2 == 0.0:
        raise UndefinedMetric("sparsity of the zero vector is undefined")
    root = math.sqrt(n)
    value = (root - l1_norm(w) / l2) / (root - 1.0)
    # rounding can push the extremes a few ulps outside the interval
    return min(1.0, max(0.0, value))


def weight_moments(w) -> tuple[float, float]:
    """Population mean and standard deviation (divisor K, not K - 1)."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise DimensionError("moments of an empty vector")
    return float(np.mean(w)), float(np.std(w, ddof=0))


def weight_health(w, cfg: MetricConfig = MetricConfig()) -> float:
    mu, sigma = weight_moments(w)
    target = cfg.sigma_target
    return -(abs(mu) / target + abs(sigma - target) / target)


def stability(w_curr, w_prev) -> float:
    """``1 - ||w_curr - w_prev|| / ||w_prev||``; 1 means no change."""
    a = np.asarray(w_curr, dtype=np.float64).reshape(-1)
    b = np.asarray(w_prev, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise DimensionError("stability of an empty vector")
    if a.size != b.size:
        raise DimensionError(f"stability needs equal lengths ({a.size} vs {b.size})")
    base = l2_norm(b)
    if base == 0.0:
        raise UndefinedMetric("stability relative to an all-zero checkpoint is undefined")
    return 1.0 - l2_norm(a - b) / base


def genotype_of(
    w_curr,
    w_prev=None,
    cfg: MetricConfig = MetricConfig(),
    training_meta: Optional[Mapping] = None,
) -> Genotype:
    """Build a :class:`Genotype` for ``w_curr``.

    Without a previous checkpoint the stability is taken as 1.0 and flagged
    with ``stability_assumed=True``. ``training_meta`` may carry ``accuracy``,
    ``loss``, ``epochs_trained``, ``learning_rate`` and ``batch_size``.
    """
    meta = dict(training_meta or {})
    allowed = {"accuracy", "loss", "epochs_trained", "learning_rate", "batch_size"}
    meta = {k: v for k, v in meta.items() if k in allowed and v is not None}
    if w_prev is None:
        rho, assumed = 1.0, True
    else:
        rho, assumed = stability(w_curr, w_prev), False
    return Genotype(
        sparsity=sparsity(w_curr),
        stability=rho,
        health=weight_health(w_curr, cfg),
        stability_assumed=assumed,
        **meta,
    )
