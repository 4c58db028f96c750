"""Counter-based deterministic random number generation.

Every draw derives a fresh numpy generator from (seed, counter) and bumps
the counter, so a stream is fully described by two integers. That makes
random state trivially serializable into checkpoints and guarantees that
the same seed plus the same call sequence reproduces the same draws.
"""

from __future__ import annotations

import numpy as np


class RngState:
    """A reproducible random stream identified by a seed and a draw counter."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed)
        self.counter = int(counter)

    def _generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.counter,))
        self.counter += 1
        return np.random.default_rng(seq)

    def uniform(self, shape) -> np.ndarray:
        return self._generator().random(shape)

    def normal(self, shape, std: float = 1.0) -> np.ndarray:
        return self._generator().normal(0.0, std, size=shape)

    def truncated_normal(self, shape, std: float) -> np.ndarray:
        """Normal(0, std) with draws beyond 2 std resampled."""
        gen = self._generator()
        out = gen.normal(0.0, std, size=shape)
        bad = np.abs(out) > 2.0 * std
        while bad.any():
            out[bad] = gen.normal(0.0, std, size=int(bad.sum()))
            bad = np.abs(out) > 2.0 * std
        return out

    def integers(self, low: int, high: int, size=None):
        return self._generator().integers(low, high, size=size)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._generator().choice(n, size=size, replace=replace)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator().permutation(n)

    def fork(self) -> "RngState":
        """Derive an independent child stream (consumes one draw)."""
        child_seed = int(self._generator().integers(0, 2**63 - 1))
        return RngState(child_seed)

    def state(self) -> dict:
        return {"seed": self.seed, "counter": self.counter}

    @classmethod
    def from_state(cls, state: dict) -> "RngState":
        return cls(state["seed"], state["counter"])

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, counter={self.counter})"
