"""A small ReLU MLP over flat weight vectors, with Adam and MAC accounting.

Canonical flatten order: layer by layer; within a layer the weight matrix of
shape ``(fan_in, fan_out)`` in row-major order, followed by the bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DimensionError


@dataclass
class MacCounter:
    """Running multiply-accumulate tally."""

    total: int = 0

    def add(self, n: int) -> None:
        self.total += int(n)


class MlpModel:
    def __init__(self, dims: Sequence[int]):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise DimensionError(f"invalid layer dims {dims}")
        self.dims = dims
        self.shapes = list(zip(dims[:-1], dims[1:]))
        self.num_params = sum(i * o + o for i, o in self.shapes)

    def __repr__(self) -> str:
        return f"MlpModel({self.dims})"

    def init_weights(self, rng: np.random.Generator) -> np.ndarray:
        """He-normal weights, zero biases."""
        parts = []
        for fan_in, fan_out in self.shapes:
            parts.append(rng.standard_normal(fan_in * fan_out) * np.sqrt(2.0 / fan_in))
            parts.append(np.zeros(fan_out))
        return np.concatenate(parts)

    def unflatten(self, w) -> list[tuple[np.ndarray, np.ndarray]]:
        w = np.asarray(w, dtype=np.float64).reshape(-1)
        if w.size != self.num_params:
            raise DimensionError(f"expected {self.num_params} weights for {self.dims}, got {w.size}")
        layers, pos = [], 0
        for fan_in, fan_out in self.shapes:
            W = w[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = w[pos:pos + fan_out]
            pos += fan_out
            layers.append((W, b))
        return layers

    @staticmethod
    def flatten(layers) -> np.ndarray:
        return np.concatenate([np.concatenate([W.reshape(-1), b.reshape(-1)]) for W, b in layers])

    def forward_macs(self, batch: int) -> int:
        return batch * sum(i * o for i, o in self.shapes)

    def backward_macs(self, batch: int) -> int:
        # weight gradients for every layer, input gradients for all but the first
        inner = sum(i * o for i, o in self.shapes)
        first = self.shapes[0][0] * self.shapes[0][1]
        return batch * (2 * inner - first)

    def logits(self, w, x, counter: Optional[MacCounter] = None) -> np.ndarray:
        h = np.asarray(x, dtype=np.float64)
        layers = self.unflatten(w)
        for k, (W, b) in enumerate(layers):
            h = h @ W + b
            if k < len(layers) - 1:
                h = np.maximum(h, 0.0)
        if counter is not None:
            counter.add(self.forward_macs(h.shape[0]))
        return h

    def loss_and_grad(self, w, x, y, counter: Optional[MacCounter] = None) -> tuple[float, np.ndarray]:
        """Mean softmax cross-entropy over the batch and its gradient."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        layers = self.unflatten(w)
        acts = [x]
        pre = []
        h = x
        for k, (W, b) in enumerate(layers):
            z = h @ W + b
            pre.append(z)
            h = np.maximum(z, 0.0) if k < len(layers) - 1 else z
            acts.append(h)
        n = x.shape[0]
        logp = log_softmax(h)
        loss = float(-logp[np.arange(n), y].mean())

        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = []
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            grads.append((acts[k].T @ delta, delta.sum(axis=0)))
            if k > 0:
                delta = (delta @ W.T) * (pre[k - 1] > 0)
        grads.reverse()
        if counter is not None:
            counter.add(self.forward_macs(n) + self.backward_macs(n))
        return loss, self.flatten(grads)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(np.asarray(z, dtype=np.float64)))


def cross_entropy(logits: np.ndarray, y) -> float:
    y = np.asarray(y, dtype=np.int64)
    logp = log_softmax(np.asarray(logits, dtype=np.float64))
    return float(-logp[np.arange(y.size), y].mean())


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))

    def step(self, w: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        """Return the updated weights; moments are updated in place."""
        if grad.shape != self.m.shape:
            raise DimensionError("gradient length does not match optimizer state")
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return w - lr * m_hat / (np.sqrt(v_hat) + self.eps)
