"""Adaptive per-parameter optimizers: Adam for dense weights, Adagrad for embedding tables."""

from typing import Iterable

import numpy as np

from frontdoor_mta.autodiff import Value


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t: dict[str, int] = {}

    def step(self, params: Iterable[tuple[str, Value]], grads: dict[str, np.ndarray]) -> None:
        for name, param in params:
            g = grads[name]
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            t = self.t.get(name, 0) + 1
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            param.data = param.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            self.m[name], self.v[name], self.t[name] = m, v, t


class Adagrad:
    """Adagrad: rows that receive no gradient keep their value and accumulator."""

    def __init__(self, lr: float, eps: float = 1e-10):
        self.lr = lr
        self.eps = eps
        self.acc: dict[str, np.ndarray] = {}

    def step(self, params: Iterable[tuple[str, Value]], grads: dict[str, np.ndarray]) -> None:
        for name, param in params:
            g = grads[name]
            acc = self.acc.get(name, np.zeros_like(g)) + g * g
            param.data = param.data - self.lr * g / (np.sqrt(acc) + self.eps)
            self.acc[name] = acc
