"""Closed-form rational-expectations benchmark for the log-utility growth model."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .env import EnvParams, RegimeSchedule
from .simulate import RunArtifact, rollout, streams


@dataclass(frozen=True)
class ReSolution:
    """Coefficients of ``v(k, z) = A + B ln k + D ln z``."""

    alpha: float
    beta: float
    mu: float
    rho: float
    A: float
    B: float
    D: float

    @classmethod
    def solve(cls, alpha: float, beta: float, mu: float, rho: float = 0.0) -> "ReSolution":
        ab = alpha * beta
        B = alpha / (1.0 - ab)
        D = 1.0 / ((1.0 - ab) * (1.0 - beta * rho))
        # log(ab) term vanishes when beta == 0
        log_ab_term = ab / (1.0 - ab) * math.log(ab) if ab > 0.0 else 0.0
        A = (math.log(1.0 - ab) + log_ab_term + beta * mu * D) / (1.0 - beta)
        return cls(alpha, beta, mu, rho, A, B, D)


def _check_positive(k, z) -> None:
    if np.any(np.asarray(k) <= 0.0) or np.any(np.asarray(z) <= 0.0):
        raise ValueError("capital and shock level must be positive")


def re_policy(k, z, alpha: float, beta: float):
    """Next-period capital ``alpha * beta * z * k**alpha``."""
    _check_positive(k, z)
    return alpha * beta * z * np.power(k, alpha)


def re_consumption_share(k, z, alpha: float, beta: float) -> float:
    _check_positive(k, z)
    return 1.0 - alpha * beta


def re_value(k, z, sol: ReSolution):
    _check_positive(k, z)
    return sol.A + sol.B * np.log(k) + sol.D * np.log(z)


def bellman_residual(k: float, z: float, sol: ReSolution, order: int = 21, eps_sigma: float = 0.1) -> float:
    """|v(k, z) - [ln c + beta E v(k', z')]| under the closed-form policy.

    The expectation over ``eps ~ N(0, eps_sigma**2)`` uses Gauss-Hermite
    quadrature with ``order`` nodes.
    """
    if order < 1:
        raise ValueError("quadrature order must be at least 1")
    _check_positive(k, z)
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    s = z * k**sol.alpha
    k_next = re_policy(k, z, sol.alpha, sol.beta)
    log_z_next = sol.mu + sol.rho * math.log(z) + math.sqrt(2.0) * eps_sigma * nodes
    ev = float(np.sum(weights * re_value(k_next, np.exp(log_z_next), sol))) / math.sqrt(math.pi)
    rhs = math.log(s - k_next) + sol.beta * ev
    return abs(float(re_value(k, z, sol)) - rhs)


def residual_grid(
    sol: ReSolution,
    k_range=(0.5, 50.0),
    z_range=(math.exp(2.5), math.exp(3.5)),
    n: int = 5,
    order: int = 21,
    eps_sigma: float = 0.1,
) -> float:
    """Max relative Bellman residual over an ``n x n`` log-spaced grid."""
    worst = 0.0
    for k in np.geomspace(*k_range, n):
        for z in np.geomspace(*z_range, n):
            res = bellman_residual(float(k), float(z), sol, order, eps_sigma)
            worst = max(worst, res / abs(float(re_value(k, z, sol))))
    return worst


@dataclass
class PolicyGrid:
    k: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float).ravel()
        self.z = np.asarray(self.z, dtype=float).ravel()
        if self.k.size == 0 or self.k.shape != self.z.shape:
            raise ValueError("grid needs at least one (k, z) point")

    @property
    def G(self) -> int:
        return self.k.size

    def s(self, alpha: float) -> np.ndarray:
        return self.z * self.k**alpha


def comparison_grid(k_visited, z_visited, n: int = 20, lo: float = 0.05, hi: float = 0.95) -> PolicyGrid:
    """``n x n`` log-spaced grid over the central quantile box of visited states."""
    k_lo, k_hi = np.quantile(k_visited, [lo, hi])
    z_lo, z_hi = np.quantile(z_visited, [lo, hi])
    kk, zz = np.meshgrid(np.geomspace(k_lo, k_hi, n), np.geomspace(z_lo, z_hi, n), indexing="ij")
    return PolicyGrid(kk, zz)


def policy_distance(grid: PolicyGrid, share: Callable[[np.ndarray], np.ndarray], sol: ReSolution) -> float:
    """Mean squared gap between closed-form and learned next-period capital.

    ``share`` maps an array of total resources to consumption shares; the
    learned next capital is ``(1 - share(s)) * s``.
    """
    s = grid.s(sol.alpha)
    k_star = re_policy(grid.k, grid.z, sol.alpha, sol.beta)
    k_approx = (1.0 - np.asarray(share(s), dtype=float).ravel()) * s
    return float(np.mean((k_star - k_approx) ** 2))


def simulate_re(params: EnvParams, schedule: RegimeSchedule, horizon: int, seed: int, beta: float) -> RunArtifact:
    """Rollout under the constant share ``1 - alpha * beta`` with the seed's shock stream."""
    a_star = 1.0 - params.alpha * beta
    return rollout(lambda _state: a_star, params, schedule, horizon, streams(seed)["shock"])
