"""Ornstein-Uhlenbeck exploration noise with a decaying scale."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OuParams:
    theta: float = 0.15
    mu_bar: float = 0.0
    sigma_ou: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.sigma_ou <= 0.0:
            raise ValueError("sigma_ou must be positive")

    @property
    def stationary_variance(self) -> float:
        return self.sigma_ou**2 / (1.0 - (1.0 - self.theta) ** 2)


@dataclass(frozen=True)
class ExploreSchedule:
    """Linear decay of the exploration scale from ``sigma_start`` to ``sigma_min``."""

    sigma_start: float = 1.0
    sigma_min: float = 0.3
    decay_steps: int = 25_600

    def __post_init__(self):
        if not self.sigma_start >= self.sigma_min > 0.0:
            raise ValueError("need sigma_start >= sigma_min > 0")
        if self.decay_steps < 0:
            raise ValueError("decay_steps must be non-negative")


def ou_step(x: float, p: OuParams, xi: float) -> float:
    # Unit time step: an AR(1) with coefficient 1 - theta.
    return x + p.theta * (p.mu_bar - x) + p.sigma_ou * xi


def ou_path(n: int, p: OuParams, rng: np.random.Generator, x0: float = 0.0) -> np.ndarray:
    """``n`` successive iterates of :func:`ou_step` driven by ``rng``."""
    xi = rng.standard_normal(n)
    out = np.empty(n)
    x = x0
    for i in range(n):
        x = ou_step(x, p, xi[i])
        out[i] = x
    return out


def sigma_at(sched: ExploreSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("period must be non-negative")
    if sched.decay_steps == 0 or t >= sched.decay_steps:
        return sched.sigma_min
    frac = t / sched.decay_steps
    return sched.sigma_start + (sched.sigma_min - sched.sigma_start) * frac


def explore_action(a_policy: float, sigma_t: float, noise: float, a_lo: float = 0.001, a_hi: float = 0.999) -> float:
    return min(max(a_policy + sigma_t * noise, a_lo), a_hi)


class OuNoise:
    """Stateful OU process owned by one agent."""

    def __init__(self, params: OuParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.x = 0.0

    def reset(self) -> None:
        self.x = 0.0

    def sample(self) -> float:
        self.x = ou_step(self.x, self.params, float(self.rng.standard_normal()))
        return self.x
