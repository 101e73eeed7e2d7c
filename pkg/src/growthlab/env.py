"""Stochastic optimal-growth environment.

One good, log utility, no depreciation. The agent observes only total
resources ``s = z * k**alpha`` and picks the share ``a`` of it to consume;
the rest becomes next period's capital.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple


@dataclass(frozen=True)
class EnvParams:
    alpha: float = 0.4
    k_min: float = 1e-6
    k_max: float = 1000.0
    a_lo: float = 0.001
    a_hi: float = 0.999
    r_min: float = -10.0
    k0: float = 1.0
    z0: float | None = None  # None -> exp(mu) of the base regime

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.k_min < self.k_max:
            raise ValueError("need 0 < k_min < k_max")
        if not 0.0 < self.a_lo < self.a_hi < 1.0:
            raise ValueError("need 0 < a_lo < a_hi < 1")
        if self.z0 is not None and self.z0 <= 0.0:
            raise ValueError("z0 must be positive")
        if not self.k_min <= self.k0 <= self.k_max:
            raise ValueError("k0 must lie within [k_min, k_max]")


@dataclass(frozen=True)
class ShockParams:
    """Coefficients of ``ln z_t = mu + rho ln z_{t-1} + eps_t``."""

    mu: float = 3.0
    rho: float = 0.0
    eps_sigma: float = 0.1

    def __post_init__(self):
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if self.eps_sigma < 0.0:
            raise ValueError("eps_sigma must be non-negative")


@dataclass(frozen=True)
class RegimeSchedule:
    """Base shock regime plus timed permanent switches and one-period overrides."""

    base: ShockParams = field(default_factory=ShockParams)
    permanent_changes: tuple[tuple[int, ShockParams], ...] = ()
    one_period_overrides: tuple[tuple[int, ShockParams], ...] = ()

    def __post_init__(self):
        for name in ("permanent_changes", "one_period_overrides"):
            entries = tuple((int(p), sp) for p, sp in getattr(self, name))
            object.__setattr__(self, name, entries)
            periods = [p for p, _ in entries]
            if any(p < 0 for p in periods):
                raise ValueError(f"{name}: periods must be non-negative")
            if any(b <= a for a, b in zip(periods, periods[1:])):
                raise ValueError(f"{name}: periods must be strictly increasing")


class EnvState(NamedTuple):
    k: float
    z: float
    s: float
    t: int


class Transition(NamedTuple):
    s: float
    a: float
    r: float
    s_next: float


def output(k: float, alpha: float) -> float:
    if k <= 0.0:
        raise ValueError(f"capital must be positive, got {k}")
    return k**alpha


def shock_next(z_prev: float, p: ShockParams, eps: float) -> float:
    if z_prev <= 0.0:
        raise ValueError(f"shock level must be positive, got {z_prev}")
    return math.exp(p.mu + p.rho * math.log(z_prev) + eps)


def regime_at(schedule: RegimeSchedule, period: int) -> ShockParams:
    """Shock regime in force at ``period``; overrides beat permanent changes."""
    for p, sp in schedule.one_period_overrides:
        if p == period:
            return sp
    current = schedule.base
    for p, sp in schedule.permanent_changes:
        if p <= period:
            current = sp
        else:
            break
    return current


def make_state(k: float, z: float, t: int, alpha: float) -> EnvState:
    return EnvState(k, z, z * output(k, alpha), t)


def reset(params: EnvParams, schedule: RegimeSchedule | None = None) -> EnvState:
    z0 = params.z0
    if z0 is None:
        base = schedule.base if schedule is not None else ShockParams()
        z0 = math.exp(base.mu)
    return make_state(params.k0, z0, 0, params.alpha)


def clip_action(a: float, params: EnvParams) -> float:
    return min(max(a, params.a_lo), params.a_hi)


def step(
    state: EnvState,
    a_raw: float,
    xi: float,
    params: EnvParams,
    schedule: RegimeSchedule,
) -> tuple[EnvState, float]:
    """Advance one period.

    ``xi`` is a standard-normal draw; it is scaled by the ``eps_sigma`` of the
    regime in force at ``t + 1`` so that paired runs sharing a draw stream see
    identical shock paths.
    """
    a = clip_action(a_raw, params)
    c = a * state.s
    r = max(math.log(c), params.r_min) if c > 0.0 else params.r_min
    k_next = min(max((1.0 - a) * state.s, params.k_min), params.k_max)
    regime = regime_at(schedule, state.t + 1)
    z_next = shock_next(state.z, regime, regime.eps_sigma * xi)
    return make_state(k_next, z_next, state.t + 1, params.alpha), r

