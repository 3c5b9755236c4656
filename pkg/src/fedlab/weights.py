"""Flat weight-vector arithmetic and seeded random streams.

A weight vector is a 1-D ``float64`` numpy array. Layer structure is not
represented here; see :mod:`fedlab.fedsim.mlp` for the canonical flatten order.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionError, NumericError

WeightVector = np.ndarray


def as_weights(values, *, allow_empty: bool = False) -> WeightVector:
    """Coerce ``values`` to a finite 1-D float64 array (always a copy)."""
    w = np.array(values, dtype=np.float64).reshape(-1)
    if w.size == 0 and not allow_empty:
        raise DimensionError("weight vector is empty")
    if not np.all(np.isfinite(w)):
        raise NumericError("weight vector contains NaN or Inf")
    return w


def _nonempty(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        w = w.reshape(-1)
    if w.size == 0:
        raise DimensionError("weight vector is empty")
    return w


def l1_norm(w) -> float:
    return float(np.sum(np.abs(_nonempty(w))))


def l2_norm(w) -> float:
    w = _nonempty(w)
    # scale by the largest magnitude so squares neither overflow nor underflow
    peak = float(np.max(np.abs(w)))
    if peak == 0.0 or not np.isfinite(peak):
        return peak
    return peak * float(np.sqrt(np.sum(np.square(w / peak))))


def axpy_combine(coeffs: Sequence[float], vectors: Sequence) -> WeightVector:
    """Return ``sum(c_i * v_i)`` over equal-length vectors."""
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    if len(vectors) == 0 or coeffs.size != len(vectors):
        raise DimensionError(
            f"need one coefficient per vector (got {coeffs.size} and {len(vectors)})"
        )
    mat = [_nonempty(v) for v in vectors]
    length = mat[0].size
    if any(v.size != length for v in mat):
        raise DimensionError("vectors have unequal lengths")
    out = np.zeros(length, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        for c, v in zip(coeffs, mat):
            out += c * v
    if not np.all(np.isfinite(out)):
        raise NumericError("combination produced a non-finite value")
    return out


def check_same_length(*vectors) -> int:
    lengths = {np.asarray(v).size for v in vectors}
    if len(lengths) != 1:
        raise DimensionError(f"length mismatch: {sorted(lengths)}")
    return lengths.pop()


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; equal seeds give equal streams."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def child_seed(parent_seed: int, index: int) -> int:
    """Derive the 64-bit seed of worker ``index`` from ``parent_seed``.

    Uses numpy's SeedSequence spawn keys, so children are statistically
    independent of each other and of the parent stream.
    """
    ss = np.random.SeedSequence(int(parent_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def child_rng(parent_seed: int, index: int) -> np.random.Generator:
    return make_rng(child_seed(parent_seed, index))
