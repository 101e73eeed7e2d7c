"""Run configuration: TOML files merged over per-scenario defaults.

Parsing is strict. Any key not in the schema below aborts before any
computation starts.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from .agent import AgentConfig
from .env import EnvParams, RegimeSchedule, ShockParams
from .exploration import ExploreSchedule, OuParams


class ConfigError(ValueError):
    pass


SCENARIOS = (
    "baseline_learning",
    "transitory_shock",
    "permanent_change",
    "exploration_comparison",
    "re_comparison",
)

# sigma_min for the low / middle / high exploration agents
EXPLORATION_LEVELS = {"low": 0.1, "middle": 0.3, "high": 0.6}

_SHOCK_KEYS = {"mu", "rho", "eps_sigma"}
_EVENT_KEYS = _SHOCK_KEYS | {"period"}
_AGENT_KEYS = {f.name for f in fields(AgentConfig)} - {"seed"}

SCHEMA: dict[str, set[str]] = {
    "scenario": {"name", "horizon", "seeds", "pre_window", "welfare_window", "greedy_eval", "grid_size"},
    "env": {f.name for f in fields(EnvParams)},
    "shock": _SHOCK_KEYS | {"change", "override"},
    "agent": _AGENT_KEYS,
    "explore": {"sigma_start", "decay_steps"},
    "ou": {f.name for f in fields(OuParams)},
    "agents": {"name", "sigma_min"},
    "run": {"out", "jobs", "checkpoint_every"},
    "oracle": {"order", "n", "k_lo", "k_hi", "z_halfwidth", "threshold", "perturb_B"},
    "compare": {"checkpoints", "horizon"},
}


def _three_agents():
    return [{"name": n, "sigma_min": s} for n, s in EXPLORATION_LEVELS.items()]


def scenario_defaults(name: str) -> dict:
    """Fully populated config tree for a named scenario."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    tree = {
        "scenario": {
            "name": name,
            "horizon": 512,
            "seeds": [0],
            "pre_window": 50,
            "welfare_window": 100,
            "greedy_eval": False,
            "grid_size": 20,
        },
        "env": {k: v for k, v in asdict(EnvParams()).items() if v is not None},
        "shock": {"mu": 3.0, "rho": 0.0, "eps_sigma": 0.1, "change": [], "override": []},
        "agent": {k: v for k, v in asdict(AgentConfig()).items() if k != "seed"},
        "explore": {"sigma_start": 1.0, "decay_steps": ExploreSchedule().decay_steps},
        "ou": asdict(OuParams()),
        "agents": [{"name": "middle", "sigma_min": EXPLORATION_LEVELS["middle"]}],
        "run": {"out": "runs", "jobs": 1, "checkpoint_every": 0},
        "oracle": {
            "order": 21,
            "n": 5,
            "k_lo": 0.5,
            "k_hi": 50.0,
            "z_halfwidth": 0.5,
            "threshold": 1e-6,
            "perturb_B": 0.0,
        },
        "compare": {"checkpoints": {}, "horizon": 512},
    }
    for key in ("actor_hidden", "critic_hidden"):
        tree["agent"][key] = list(tree["agent"][key])
    if name in ("transitory_shock", "permanent_change"):
        # Base regime z = exp(0.1 + eps); resources sit near 0.6, hence s_ref = 1.
        tree["shock"].update(mu=0.1, rho=0.0, eps_sigma=0.1)
        tree["agent"]["s_ref"] = 1.0
        tree["agents"] = _three_agents()
    if name == "transitory_shock":
        tree["scenario"].update(horizon=200, welfare_window=15)
        tree["shock"]["override"] = [{"period": 100, "mu": 3.0, "rho": 0.0, "eps_sigma": 0.1}]
    elif name == "permanent_change":
        tree["scenario"].update(horizon=300, welfare_window=100)
        tree["shock"]["change"] = [{"period": 200, "mu": 0.1, "rho": 0.7, "eps_sigma": 0.1}]
    elif name in ("exploration_comparison", "re_comparison"):
        tree["agents"] = _three_agents()
    return tree


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "checkpoints":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(tree: dict) -> None:
    for section, body in tree.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        entries = body if isinstance(body, list) else [body]
        for entry in entries:
            if not isinstance(entry, dict):
                raise ConfigError(f"section [{section}] must be a table")
            for key in entry:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
    for kind in ("change", "override"):
        for ev in tree.get("shock", {}).get(kind, []):
            if not isinstance(ev, dict):
                raise ConfigError(f"shock.{kind} entries must be tables")
            unknown = set(ev) - _EVENT_KEYS
            if unknown:
                raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in [[shock.{kind}]]")
            if "period" not in ev:
                raise ConfigError(f"[[shock.{kind}]] entry needs a period")


@dataclass(frozen=True)
class AgentSpec:
    name: str
    sigma_min: float


@dataclass
class RunConfig:
    tree: dict
    scenario: str
    env: EnvParams
    schedule: RegimeSchedule
    agent: AgentConfig
    explore: ExploreSchedule
    ou: OuParams
    agents: tuple[AgentSpec, ...]
    horizon: int
    seeds: tuple[int, ...]
    pre_window: int
    welfare_window: int
    greedy_eval: bool
    grid_size: int
    out: Path
    jobs: int
    checkpoint_every: int
    oracle: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)

    def explore_for(self, spec: AgentSpec) -> ExploreSchedule:
        return ExploreSchedule(self.explore.sigma_start, spec.sigma_min, self.explore.decay_steps)

    def agent_config(self, seed: int) -> AgentConfig:
        return AgentConfig(**{**asdict(self.agent), "seed": int(seed)})

    def dump(self, path) -> None:
        Path(path).write_text(tomli_w.dumps(self.tree))


def _shock(entry: dict, base: ShockParams | None = None) -> ShockParams:
    base = base or ShockParams()
    return ShockParams(
        float(entry.get("mu", base.mu)),
        float(entry.get("rho", base.rho)),
        float(entry.get("eps_sigma", base.eps_sigma)),
    )


def build(tree: dict) -> RunConfig:
    _check_keys(tree)
    try:
        sc = tree["scenario"]
        sh = tree["shock"]
        base = _shock(sh)
        schedule = RegimeSchedule(
            base,
            tuple((int(e["period"]), _shock(e, base)) for e in sh.get("change", [])),
            tuple((int(e["period"]), _shock(e, base)) for e in sh.get("override", [])),
        )
        env_kw = dict(tree["env"])
        env = EnvParams(**env_kw)
        agent = AgentConfig(**tree["agent"])
        explore_kw = tree["explore"]
        agents = tuple(AgentSpec(str(a["name"]), float(a["sigma_min"])) for a in tree["agents"])
        if not agents:
            raise ConfigError("at least one [[agents]] entry is required")
        if len({a.name for a in agents}) != len(agents):
            raise ConfigError("agent names must be unique")
        for a in agents:
            ExploreSchedule(float(explore_kw["sigma_start"]), a.sigma_min, int(explore_kw["decay_steps"]))
        explore = ExploreSchedule(
            float(explore_kw["sigma_start"]), min(a.sigma_min for a in agents), int(explore_kw["decay_steps"])
        )
        seeds = tuple(int(s) for s in sc["seeds"])
        if not seeds:
            raise ConfigError("scenario.seeds must not be empty")
        cfg = RunConfig(
            tree=tree,
            scenario=sc["name"],
            env=env,
            schedule=schedule,
            agent=agent,
            explore=explore,
            ou=OuParams(**tree["ou"]),
            agents=agents,
            horizon=int(sc["horizon"]),
            seeds=seeds,
            pre_window=int(sc["pre_window"]),
            welfare_window=int(sc["welfare_window"]),
            greedy_eval=bool(sc["greedy_eval"]),
            grid_size=int(sc["grid_size"]),
            out=Path(tree["run"]["out"]),
            jobs=int(tree["run"]["jobs"]),
            checkpoint_every=int(tree["run"]["checkpoint_every"]),
            oracle=dict(tree["oracle"]),
            compare=dict(tree["compare"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.horizon < 1 or cfg.jobs < 1 or cfg.pre_window < 1 or cfg.welfare_window < 1:
        raise ConfigError("horizon, jobs, pre_window and welfare_window must be positive")
    _check_scenario_shape(cfg)
    return cfg


def _check_scenario_shape(cfg: RunConfig) -> None:
    sched = cfg.schedule
    if cfg.scenario == "transitory_shock" and (len(sched.one_period_overrides) != 1 or sched.permanent_changes):
        raise ConfigError("transitory_shock needs exactly one one-period override and no permanent change")
    if cfg.scenario == "permanent_change" and (len(sched.permanent_changes) != 1 or sched.one_period_overrides):
        raise ConfigError("permanent_change needs exactly one permanent change and no override")
    if cfg.scenario == "exploration_comparison" and len(cfg.agents) != 3:
        raise ConfigError("exploration_comparison needs three agents differing in sigma_min")
    for period, _ in sched.permanent_changes + sched.one_period_overrides:
        if not 0 < period < cfg.horizon:
            raise ConfigError(f"regime event at period {period} lies outside the horizon")


def load(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a TOML file (or nothing) and resolve it against its scenario defaults."""
    user: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    user = _merge(user, overrides or {})
    name = user.get("scenario", {}).get("name", "baseline_learning")
    tree = _merge(scenario_defaults(name), user)
    return build(tree)


def event_period(schedule: RegimeSchedule) -> int | None:
    """Period of the first scheduled regime event, if any."""
    periods = [p for p, _ in schedule.one_period_overrides] + [p for p, _ in schedule.permanent_changes]
    return min(periods) if periods else None


def oracle_z_range(cfg: RunConfig) -> tuple[float, float]:
    hw = float(cfg.oracle["z_halfwidth"])
    mu = cfg.schedule.base.mu / (1.0 - cfg.schedule.base.rho)
    return math.exp(mu - hw), math.exp(mu + hw)
