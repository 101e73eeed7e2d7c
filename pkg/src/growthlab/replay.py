"""Fixed-capacity replay memory with uniform sampling."""
from __future__ import annotations

import csv

import numpy as np

from .env import Transition


class UnderfullError(ValueError):
    """Raised when a batch larger than the stored count is requested."""


class ReplayBuffer:
    """Ring buffer of transitions stored column-wise as float arrays."""

    def __init__(self, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = int(capacity)
        self._data = np.zeros((self.capacity, 4))
        self.write_cursor = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def push(self, t: Transition) -> None:
        self._data[self.write_cursor] = (t.s, t.a, t.r, t.s_next)
        self.write_cursor = (self.write_cursor + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def contents(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        if self.count < self.capacity:
            rows = self._data[: self.count]
        else:
            rows = np.roll(self._data, -self.write_cursor, axis=0)
        return [Transition(*map(float, row)) for row in rows]

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.count < n:
            raise UnderfullError(f"requested {n} transitions but only {self.count} stored")
        return rng.integers(0, self.count, size=n)

    def sample_arrays(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
        """Columns ``(s, a, r, s_next)`` of ``n`` uniform draws with replacement."""
        rows = self._data[self.sample_indices(n, rng)]
        return rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        rows = self._data[self.sample_indices(n, rng)]
        return [Transition(*map(float, row)) for row in rows]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "a", "r", "s_next"])
            for t in self.contents():
                w.writerow([repr(v) for v in t])
