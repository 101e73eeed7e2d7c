"""Command-line entry point: ``growthlab <command> --config run.toml``.

Exit codes: 0 success, 1 config error, 2 verification failure, 3 IO error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import nn
from .agent import DIAGNOSTIC_COLUMNS, evaluate, policy_share, run_training
from .config import ConfigError, RunConfig, load, oracle_z_range
from .oracle import ReSolution, comparison_grid, policy_distance, residual_grid, simulate_re
from .scenarios import ArtifactError, render_report, run_scenario
from .simulate import write_csv

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("growthlab")


def _overrides(args) -> dict:
    tree: dict = {}
    if getattr(args, "out", None):
        tree.setdefault("run", {})["out"] = args.out
    if getattr(args, "jobs", None):
        tree.setdefault("run", {})["jobs"] = args.jobs
    if getattr(args, "seed", None) is not None:
        tree.setdefault("scenario", {})["seeds"] = [args.seed]
    if getattr(args, "greedy_eval", False):
        tree.setdefault("scenario", {})["greedy_eval"] = True
    return tree


def _load(args) -> RunConfig:
    if args.config is not None and not Path(args.config).is_file():
        raise FileNotFoundError(f"config file not found: {args.config}")
    return load(args.config, _overrides(args))


def cmd_train(cfg: RunConfig) -> int:
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "resolved_config.toml")
    spec = cfg.agents[0]
    seed = cfg.seeds[0]
    res = run_training(
        cfg.env,
        cfg.schedule,
        cfg.agent_config(seed),
        cfg.ou,
        cfg.explore_for(spec),
        checkpoint_every=cfg.checkpoint_every,
        greedy=cfg.greedy_eval,
        grid_size=cfg.grid_size,
    )
    write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, res.diagnostics.rows())
    res.series.to_csv(out / "series.csv")
    nn.save_checkpoint(out / "actor.ckpt", res.actor, cfg.agent.s_ref)
    nn.save_checkpoint(out / "critic.ckpt", res.critic, cfg.agent.s_ref)
    if res.snapshots:
        ckpt_dir = out / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        for ep, (actor, critic) in sorted(res.snapshots.items()):
            nn.save_checkpoint(ckpt_dir / f"actor_ep{ep:04d}.ckpt", actor, cfg.agent.s_ref)
            nn.save_checkpoint(ckpt_dir / f"critic_ep{ep:04d}.ckpt", critic, cfg.agent.s_ref)
    print(f"trained {cfg.agent.episodes_e} episodes; final d_e {res.diagnostics.d_e[-1]:.6g}; wrote {out}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    root = run_scenario(cfg)
    print(f"scenario {cfg.scenario} written to {root}")
    return EXIT_OK


def cmd_verify_oracle(cfg: RunConfig) -> int:
    o = cfg.oracle
    base = cfg.schedule.base
    sol = ReSolution.solve(cfg.env.alpha, cfg.agent.beta, base.mu, base.rho)
    if o["perturb_B"]:
        sol = ReSolution(sol.alpha, sol.beta, sol.mu, sol.rho, sol.A, sol.B + float(o["perturb_B"]), sol.D)
    worst = residual_grid(
        sol,
        (float(o["k_lo"]), float(o["k_hi"])),
        oracle_z_range(cfg),
        int(o["n"]),
        int(o["order"]),
        base.eps_sigma,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    cfg.dump(cfg.out / "resolved_config.toml")
    ok = worst < float(o["threshold"])
    print(f"max relative Bellman residual {worst:.3e} (threshold {float(o['threshold']):.1e}): {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_compare(cfg: RunConfig) -> int:
    checkpoints = dict(cfg.compare.get("checkpoints") or {})
    if not checkpoints:
        checkpoints = {cfg.agents[0].name: str(cfg.out / "actor.ckpt")}
    actors = {}
    for name, path in checkpoints.items():
        if not Path(path).is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        actors[name] = nn.load_checkpoint(path)
    out = cfg.out / "compare"
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "resolved_config.toml")
    base = cfg.schedule.base
    sol = ReSolution.solve(cfg.env.alpha, cfg.agent.beta, base.mu, base.rho)
    horizon = int(cfg.compare.get("horizon", cfg.horizon))
    seed = cfg.seeds[0]
    re_path = simulate_re(cfg.env, cfg.schedule, horizon, seed, cfg.agent.beta)
    re_path.to_csv(out / "re_series.csv")
    grid = comparison_grid(re_path["k"], re_path["z"], cfg.grid_size)
    s = grid.s(sol.alpha)
    k_star = sol.alpha * sol.beta * s
    cols = {"g": np.arange(grid.G), "k": grid.k, "z": grid.z, "s": s, "k_star": k_star}
    summary = []
    sigma = {a.name: a.sigma_min for a in cfg.agents}
    for name, (actor, s_ref) in actors.items():
        share = lambda x, actor=actor, s_ref=s_ref: policy_share(actor, x, s_ref)
        cols[f"k_{name}"] = (1.0 - share(s)) * s
        d = policy_distance(grid, share, sol)
        summary.append((name, d))
        art = evaluate(actor, cfg.env, cfg.schedule, horizon, seed, s_ref, cfg.ou,
                       sigma=sigma.get(name, cfg.explore.sigma_min), greedy=cfg.greedy_eval)
        art.to_csv(out / f"{name}_series.csv")
        print(f"{name}: d_e = {d:.6g}")
    write_csv(out / "policy_grid.csv", list(cols), zip(*cols.values()))
    write_csv(out / "summary.csv", ("agent", "d_e"), summary)
    return EXIT_OK


def cmd_report(scenario_dir) -> int:
    root = Path(scenario_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"scenario directory not found: {root}")
    path = render_report(root)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="growthlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=True):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--out", help="output directory (overrides run.out)")
        if seeds:
            p.add_argument("--seed", type=int, help="single seed (overrides scenario.seeds)")
            p.add_argument("--jobs", type=int, help="parallel worker processes")
            p.add_argument("--greedy-eval", action="store_true", help="evaluate without exploration noise")

    common(sub.add_parser("train", help="train one agent"))
    common(sub.add_parser("simulate", help="run a named scenario"))
    common(sub.add_parser("compare", help="compare checkpoints against the closed form"))
    common(sub.add_parser("verify-oracle", help="Bellman-residual check of the closed form"), seeds=False)
    rep = sub.add_parser("report", help="render report.md for a scenario directory")
    rep.add_argument("dir", help="scenario output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.dir)
        cfg = _load(args)
        return {
            "train": cmd_train,
            "simulate": cmd_simulate,
            "compare": cmd_compare,
            "verify-oracle": cmd_verify_oracle,
        }[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
