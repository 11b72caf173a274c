"""Adam over named parameter arrays, and a central-difference gradient oracle."""

from __future__ import annotations

from typing import Callable

import numpy as np


class Adam:
    """Bias-corrected Adam updating arrays in place.

    Parameters are passed as a dict of arrays so that the region table and
    the role translations can share one optimizer state.
    """

    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {params[name].shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def finite_difference(fn: Callable[[np.ndarray], float], params, h: float = 1e-6) -> np.ndarray:
    """Central-difference estimate of the gradient of a scalar function."""
    x = np.array(params, dtype=float)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = fn(x)
        flat[i] = keep - h
        down = fn(x)
        flat[i] = keep
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(x.shape)
