"""Named experiments: train agents, run paired evaluations, summarise welfare.

Output layout under ``<out>/<scenario>/``::

    <agent>/<seed>/series.csv      evaluation path of one trained agent
    <agent>/<seed>/actor.ckpt      final networks
    re/<seed>/series.csv           closed-form benchmark (re_comparison only)
    comparison.csv                 all paths joined on (seed, t)
    diagnostics.csv                per-episode training diagnostics
    policy_grid.csv                closed-form vs learned next capital
    scenario.json                  event period and windows used by the report
    report.md
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .agent import DIAGNOSTIC_COLUMNS, evaluate, policy_share, run_training
from .config import AgentSpec, RunConfig, event_period
from .env import RegimeSchedule
from .oracle import ReSolution, simulate_re
from .simulate import RunArtifact, read_csv, write_csv

log = logging.getLogger(__name__)

RE_AGENT = "re"


class ArtifactError(ValueError):
    """Raised when a scenario directory is missing or malformed."""


@dataclass
class ResponseMetrics:
    lag: int | None
    peak: float
    reversion: int | None
    band: tuple[float, float]


def welfare(utility, window: slice | tuple[int, int] | None = None) -> float:
    """Mean period utility over ``window`` (a slice or a ``(start, stop)`` pair)."""
    u = np.asarray(utility, dtype=float)
    if isinstance(window, tuple):
        window = slice(*window)
    part = u if window is None else u[window]
    if part.size == 0:
        raise ValueError("empty welfare window")
    return float(part.mean())


def response_metrics(series, shock_period: int, pre_window: int = 50, hold: int = 3) -> ResponseMetrics:
    """Lag, peak deviation and reversion time of ``series`` around a shock.

    The band is mean +/- 2 std of the ``pre_window`` periods before the
    shock (absolute half-width 1e-6 if the pre-window is flat). ``lag`` counts
    periods from the shock to the first exit from the band; ``reversion``
    counts periods from the shock to the first re-entry that then stays
    inside for ``hold`` consecutive periods.
    """
    c = np.asarray(series, dtype=float)
    if not 0 < shock_period < len(c):
        raise ValueError("shock period must lie inside the series")
    pre = c[max(0, shock_period - pre_window):shock_period]
    mean = float(pre.mean())
    std = float(pre.std())
    half = 2.0 * std if std > 0.0 else 1e-6
    outside = np.abs(c - mean) > half
    post = outside[shock_period:]
    peak = float(np.max(np.abs(c[shock_period:] - mean)))
    exits = np.flatnonzero(post)
    if exits.size == 0:
        return ResponseMetrics(None, peak, None, (mean - half, mean + half))
    lag = int(exits[0])
    reversion = None
    for i in range(lag + 1, len(post) - hold + 1):
        if not post[i:i + hold].any():
            reversion = i
            break
    return ResponseMetrics(lag, peak, reversion, (mean - half, mean + half))


def level_shift(series, change_period: int, window: int = 100) -> float:
    """(post-change mean - pre-change mean) in units of pre-change std."""
    c = np.asarray(series, dtype=float)
    pre = c[max(0, change_period - window):change_period]
    post = c[change_period:change_period + window]
    std = float(pre.std())
    diff = float(post.mean() - pre.mean())
    if std == 0.0:
        return float("inf") if diff else 0.0
    return diff / std


def welfare_window(cfg: RunConfig) -> tuple[int, int]:
    t0 = event_period(cfg.schedule)
    w = cfg.welfare_window
    if t0 is None:
        return max(0, cfg.horizon - w), cfg.horizon
    if cfg.schedule.one_period_overrides:
        start = max(0, t0 - w // 2)
        return start, min(cfg.horizon, start + w)
    return t0, min(cfg.horizon, t0 + w)


def train_schedule(schedule: RegimeSchedule) -> RegimeSchedule:
    """Agents learn in the base regime; scheduled events hit only at evaluation."""
    return RegimeSchedule(schedule.base)


def _run_agent(cfg: RunConfig, spec: AgentSpec, seed: int) -> dict:
    explore = cfg.explore_for(spec)
    result = run_training(
        cfg.env,
        train_schedule(cfg.schedule),
        cfg.agent_config(seed),
        cfg.ou,
        explore,
        greedy=False,
        grid_size=cfg.grid_size,
    )
    series = evaluate(
        result.actor,
        cfg.env,
        cfg.schedule,
        cfg.horizon,
        seed,
        cfg.agent.s_ref,
        cfg.ou,
        sigma=spec.sigma_min,
        greedy=cfg.greedy_eval,
    )
    return {"agent": spec.name, "seed": seed, "result": result, "series": series}


def train_agents(cfg: RunConfig, jobs: int | None = None) -> list[dict]:
    """Train and evaluate every (agent, seed) pair; order is deterministic."""
    tasks = [(cfg, spec, seed) for seed in cfg.seeds for spec in cfg.agents]
    jobs = jobs or cfg.jobs
    if jobs <= 1:
        return [_run_agent(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_agent, *t) for t in tasks]
        return [f.result() for f in futures]


def run_scenario(cfg: RunConfig, out_dir=None, jobs: int | None = None) -> Path:
    """Run the scenario described by ``cfg`` and write its artifacts."""
    root = Path(out_dir if out_dir is not None else cfg.out) / cfg.scenario
    root.mkdir(parents=True, exist_ok=True)
    cfg.dump(root / "resolved_config.toml")
    runs = train_agents(cfg, jobs)

    diag_rows = []
    for run in runs:
        res = run["result"]
        d = Path(root, run["agent"], str(run["seed"]))
        d.mkdir(parents=True, exist_ok=True)
        run["series"].to_csv(d / "series.csv")
        nn.save_checkpoint(d / "actor.ckpt", res.actor, cfg.agent.s_ref)
        nn.save_checkpoint(d / "critic.ckpt", res.critic, cfg.agent.s_ref)
        for row in res.diagnostics.rows():
            diag_rows.append((run["agent"], run["seed"], *row))
    write_csv(root / "diagnostics.csv", ("agent", "seed", *DIAGNOSTIC_COLUMNS), diag_rows)

    re_series = {}
    if cfg.scenario == "re_comparison":
        for seed in cfg.seeds:
            art = simulate_re(cfg.env, cfg.schedule, cfg.horizon, seed, cfg.agent.beta)
            d = root / RE_AGENT / str(seed)
            d.mkdir(parents=True, exist_ok=True)
            art.to_csv(d / "series.csv")
            re_series[seed] = art
    _write_comparison(root, cfg, runs, re_series)
    _write_policy_grid(root, cfg, runs)

    meta = {
        "scenario": cfg.scenario,
        "agents": [a.name for a in cfg.agents] + ([RE_AGENT] if re_series else []),
        "seeds": list(cfg.seeds),
        "horizon": cfg.horizon,
        "event_period": event_period(cfg.schedule),
        "event_kind": "transitory" if cfg.schedule.one_period_overrides else (
            "permanent" if cfg.schedule.permanent_changes else None
        ),
        "pre_window": cfg.pre_window,
        "welfare_window": list(welfare_window(cfg)),
        "sigma_min": {a.name: a.sigma_min for a in cfg.agents},
    }
    (root / "scenario.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    render_report(root)
    return root


def _write_comparison(root: Path, cfg: RunConfig, runs: list[dict], re_series: dict) -> None:
    names = [a.name for a in cfg.agents] + ([RE_AGENT] if re_series else [])
    header = ["seed", "t", "z"] + [f"{col}_{n}" for n in names for col in ("c", "r")]
    rows = []
    for seed in cfg.seeds:
        by_agent = {r["agent"]: r["series"] for r in runs if r["seed"] == seed}
        if re_series:
            by_agent[RE_AGENT] = re_series[seed]
        first = by_agent[names[0]]
        for i in range(len(first)):
            row = [seed, int(first["t"][i]), first["z"][i]]
            for n in names:
                row += [by_agent[n]["c"][i], by_agent[n]["r"][i]]
            rows.append(row)
    write_csv(root / "comparison.csv", header, rows)


def _write_policy_grid(root: Path, cfg: RunConfig, runs: list[dict]) -> None:
    sol = ReSolution.solve(cfg.env.alpha, cfg.agent.beta, cfg.schedule.base.mu, cfg.schedule.base.rho)
    rows = []
    for run in runs:
        grid = run["result"].grid
        s = grid.s(sol.alpha)
        k_star = sol.alpha * sol.beta * s
        k_learn = (1.0 - policy_share(run["result"].actor, s, cfg.agent.s_ref)) * s
        for g in range(grid.G):
            rows.append((run["agent"], run["seed"], g, grid.k[g], grid.z[g], s[g], k_star[g], k_learn[g]))
    write_csv(root / "policy_grid.csv", ("agent", "seed", "g", "k", "z", "s", "k_star", "k_agent"), rows)


def _fmt(v, digits: int = 4) -> str:
    if v is None:
        return "none"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.{digits}g}"


def summarise(root) -> dict:
    """Per-(agent, seed) welfare, response and distance metrics from artifacts."""
    root = Path(root)
    meta_path = root / "scenario.json"
    if not meta_path.is_file():
        raise ArtifactError(f"{meta_path} not found")
    try:
        meta = json.loads(meta_path.read_text())
        agents, seeds = meta["agents"], meta["seeds"]
        w0, w1 = meta["welfare_window"]
    except (ValueError, KeyError) as exc:
        raise ArtifactError(f"{meta_path}: {exc}") from exc
    final_d = {}
    trends: dict[str, dict[int, list[float]]] = {}
    diag_path = root / "diagnostics.csv"
    if diag_path.is_file():
        try:
            diag = read_csv(diag_path)
            for a, s, e, d in zip(diag["agent"], diag["seed"], diag["episode"], diag["d_e"]):
                final_d[(a, int(s))] = float(d)  # rows are episode-ordered; keep the last
                trends.setdefault(a, {}).setdefault(int(e), []).append(float(d))
        except (ValueError, KeyError) as exc:
            raise ArtifactError(f"{diag_path}: {exc}") from exc
    rows = []
    for agent in agents:
        for seed in seeds:
            path = root / agent / str(seed) / "series.csv"
            if not path.is_file():
                raise ArtifactError(f"{path} not found")
            try:
                art = RunArtifact.from_csv(path)
                c, r = art["c"], art["r"]
            except (ValueError, KeyError) as exc:
                raise ArtifactError(f"{path}: {exc}") from exc
            row = {"agent": agent, "seed": seed, "welfare": welfare(r, (w0, w1)),
                   "lag": None, "peak": None, "reversion": None, "shift_std": None,
                   "d_e": final_d.get((agent, seed))}
            t0 = meta.get("event_period")
            if t0 is not None and 0 < t0 < len(c):
                m = response_metrics(c, t0, meta["pre_window"])
                row.update(lag=m.lag, peak=m.peak, reversion=m.reversion)
                if meta.get("event_kind") == "permanent":
                    row["shift_std"] = level_shift(c, t0, w1 - w0)
            rows.append(row)
    return {"meta": meta, "rows": rows, "d_e_trend": trends}


def render_report(root) -> Path:
    root = Path(root)
    summary = summarise(root)
    meta, rows = summary["meta"], summary["rows"]
    lines = [f"# {meta['scenario']}", ""]
    ev = meta.get("event_period")
    lines.append(f"Horizon {meta['horizon']} periods; seeds {', '.join(map(str, meta['seeds']))}.")
    if ev is not None:
        lines.append(f"{meta['event_kind'].capitalize()} regime event at period {ev}.")
    w0, w1 = meta["welfare_window"]
    lines += [f"Welfare is mean utility over periods {w0} to {w1 - 1}.", ""]

    lines += ["## Welfare and response (mean over seeds)", "",
              "| agent | welfare | lag | reversion | peak | d_e |",
              "|---|---|---|---|---|---|"]
    for agent in meta["agents"]:
        mine = [r for r in rows if r["agent"] == agent]
        lines.append("| " + " | ".join([
            agent,
            _fmt(float(np.mean([r["welfare"] for r in mine]))),
            _mean_or_none([r["lag"] for r in mine]),
            _mean_or_none([r["reversion"] for r in mine]),
            _mean_or_none([r["peak"] for r in mine]),
            _mean_or_none([r["d_e"] for r in mine]),
        ]) + " |")

    lines += ["", "## Per-seed breakdown", "",
              "| seed | agent | welfare | lag | reversion | peak | shift (pre-std) | d_e |",
              "|---|---|---|---|---|---|---|---|"]
    for r in sorted(rows, key=lambda r: (r["seed"], meta["agents"].index(r["agent"]))):
        lines.append("| " + " | ".join([
            str(r["seed"]), r["agent"], _fmt(r["welfare"]), _fmt(r["lag"]), _fmt(r["reversion"]),
            _fmt(r["peak"]), _fmt(r["shift_std"]), _fmt(r["d_e"]),
        ]) + " |")

    trends = summary["d_e_trend"]
    if trends:
        episodes = sorted(next(iter(trends.values())))
        picks = sorted({episodes[int(round(q * (len(episodes) - 1)))] for q in (0.0, 0.25, 0.5, 0.75, 1.0)})
        lines += ["", "## Policy distance d_e by training episode (mean over seeds)", "",
                  "| agent | " + " | ".join(f"ep {e}" for e in picks) + " |",
                  "|---|" + "---|" * len(picks)]
        for agent, by_ep in trends.items():
            lines.append(f"| {agent} | " + " | ".join(_fmt(float(np.mean(by_ep[e]))) for e in picks) + " |")

    ai_agents = [a for a in meta["agents"] if a != RE_AGENT]
    if len(ai_agents) > 1:
        lines += ["", "## Welfare ordering by seed", "",
                  "Diagnostic only; the ranking is a stochastic outcome of each run.", "",
                  "| seed | ranking (best first) |", "|---|---|"]
        for seed in meta["seeds"]:
            mine = sorted((r for r in rows if r["seed"] == seed and r["agent"] in ai_agents),
                          key=lambda r: -r["welfare"])
            lines.append(f"| {seed} | " + " > ".join(r["agent"] for r in mine) + " |")
    path = root / "report.md"
    path.write_text("\n".join(lines) + "\n")
    return path


def _mean_or_none(values) -> str:
    vals = [v for v in values if v is not None]
    if not vals:
        return "none"
    return _fmt(float(np.mean(vals)))
