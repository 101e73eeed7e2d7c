"""Seeded rollouts and the per-period series artifact."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import env as growth_env
from .env import EnvParams, EnvState, RegimeSchedule

SERIES_COLUMNS = ("t", "k", "z", "s", "a", "c", "r")

# Child-stream order for SeedSequence.spawn; shocks first so every consumer
# of a seed sees the same shock draws.
STREAMS = ("shock", "noise", "replay", "init")


def streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


def fmt(v) -> str:
    """Round-trip float formatting for CSV cells."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return "none"
    return repr(float(v))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list[str]] = {h: [] for h in header}
        for row in reader:
            if len(row) != len(header):
                raise ValueError(f"{path}: ragged row {row!r}")
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


@dataclass
class RunArtifact:
    """Per-period series of one simulated path."""

    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @classmethod
    def from_rows(cls, names, rows) -> "RunArtifact":
        arr = np.asarray(rows, dtype=float).reshape(-1, len(names))
        cols = {n: arr[:, i] for i, n in enumerate(names)}
        if "t" in cols:
            cols["t"] = cols["t"].astype(int)
        return cls(cols)

    def to_csv(self, path) -> None:
        names = list(self.columns)
        write_csv(path, names, zip(*(self.columns[n] for n in names)))

    @classmethod
    def from_csv(cls, path) -> "RunArtifact":
        raw = read_csv(path)
        cols = {k: np.array([float(x) for x in v]) for k, v in raw.items()}
        if "t" in cols:
            cols["t"] = cols["t"].astype(int)
        return cls(cols)


Policy = Callable[[EnvState], float]


def rollout(
    policy: Policy,
    params: EnvParams,
    schedule: RegimeSchedule,
    horizon: int,
    shock_rng: np.random.Generator,
    state: EnvState | None = None,
) -> RunArtifact:
    """Run ``policy`` for ``horizon`` periods; ``a`` is the executed (clipped) share."""
    if state is None:
        state = growth_env.reset(params, schedule)
    xi = shock_rng.standard_normal(horizon)
    rows = []
    for i in range(horizon):
        a = growth_env.clip_action(policy(state), params)
        nxt, r = growth_env.step(state, a, float(xi[i]), params, schedule)
        rows.append((state.t, state.k, state.z, state.s, a, a * state.s, r))
        state = nxt
    return RunArtifact.from_rows(SERIES_COLUMNS, rows)
