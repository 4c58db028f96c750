"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter


class Adam:
    """Standard Adam update; zeroes gradients after each step."""

    def __init__(self, params: list[Parameter], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p in self.params:
            g = p.grad
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.zero_grad()

    def state_tensors(self) -> dict[str, np.ndarray]:
        """Moment accumulators keyed by a serialization-friendly name."""
        out = {}
        for p in self.params:
            out[f"optim.m.{p.name}"] = self.m[p.name]
            out[f"optim.v.{p.name}"] = self.v[p.name]
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray], step_count: int):
        for p in self.params:
            self.m[p.name][...] = tensors[f"optim.m.{p.name}"]
            self.v[p.name][...] = tensors[f"optim.v.{p.name}"]
        self.step_count = int(step_count)
