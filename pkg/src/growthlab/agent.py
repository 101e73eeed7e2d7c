"""Actor-critic trainer for the consumption-saving problem.

The actor maps normalised resources ``s / s_ref`` to a consumption share; the
critic scores ``(s / s_ref, a)`` pairs. Both are updated once per period from
a uniformly sampled mini-batch once the replay memory holds one batch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import env as growth_env
from . import nn
from .env import EnvParams, EnvState, RegimeSchedule, Transition
from .exploration import ExploreSchedule, OuNoise, OuParams, explore_action, sigma_at
from .oracle import ReSolution, comparison_grid, policy_distance
from .replay import ReplayBuffer
from .simulate import RunArtifact, rollout, streams

log = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ("episode", "critic_loss", "neg_J", "mean_reward", "sigma", "d_e")


@dataclass(frozen=True)
class AgentConfig:
    beta: float = 0.99
    eta_actor: float = 1e-4
    eta_critic: float = 1e-3
    batch_n: int = 64
    episodes_e: int = 150
    periods_t: int = 512
    target_tau: float = 1.0
    seed: int = 0
    optimizer: str = "sgd"
    grad_clip: float = 1.0
    s_ref: float = 30.0
    actor_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (64, 64)
    buffer_capacity: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "actor_hidden", tuple(int(n) for n in self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(n) for n in self.critic_hidden))
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.eta_actor < 0.0 or self.eta_critic < 0.0:
            raise ValueError("learning rates must be non-negative")
        if self.batch_n < 1:
            raise ValueError("batch_n must be at least 1")
        if self.episodes_e < 1:
            raise ValueError("episodes_e must be at least 1")
        if self.periods_t < self.batch_n:
            raise ValueError("periods_t must be at least batch_n")
        if not 0.0 < self.target_tau <= 1.0:
            raise ValueError("target_tau must lie in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.s_ref <= 0.0:
            raise ValueError("s_ref must be positive")


@dataclass
class Nets:
    """Live and target networks plus their optimisers."""

    actor: nn.MlpParams
    critic: nn.MlpParams
    actor_target: nn.MlpParams
    critic_target: nn.MlpParams
    actor_opt: object = None
    critic_opt: object = None

    @classmethod
    def create(cls, config: AgentConfig, params: EnvParams, rng: np.random.Generator) -> "Nets":
        bounds = (params.a_lo, params.a_hi)
        actor = nn.init((1, *config.actor_hidden, 1), rng, "tanh", "squash", bounds)
        critic = nn.init((2, *config.critic_hidden, 1), rng, "tanh", "identity")
        return cls(
            actor,
            critic,
            actor.copy(),
            critic.copy(),
            nn.make_optimizer(config.optimizer, config.eta_actor),
            nn.make_optimizer(config.optimizer, config.eta_critic),
        )


@dataclass
class TrainDiagnostics:
    episode: list[int] = field(default_factory=list)
    critic_loss: list[float] = field(default_factory=list)
    neg_J: list[float] = field(default_factory=list)
    mean_reward: list[float] = field(default_factory=list)
    sigma: list[float] = field(default_factory=list)
    d_e: list[float] = field(default_factory=list)

    def rows(self):
        return zip(self.episode, self.critic_loss, self.neg_J, self.mean_reward, self.sigma, self.d_e)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name)) for name in DIAGNOSTIC_COLUMNS}


@dataclass
class TrainResult:
    actor: nn.MlpParams
    critic: nn.MlpParams
    diagnostics: TrainDiagnostics
    series: RunArtifact
    snapshots: dict[int, tuple[nn.MlpParams, nn.MlpParams]]
    grid: object = None
    buffer_count: int = 0
    n_updates: int = 0


def policy_share(actor: nn.MlpParams, s, s_ref: float) -> np.ndarray:
    """Greedy consumption share for an array of resource levels."""
    s = np.asarray(s, dtype=float).reshape(-1, 1)
    return nn.forward(actor, s / s_ref)[:, 0]


def critic_inputs(s, a, s_ref: float) -> np.ndarray:
    return np.column_stack((np.asarray(s, dtype=float) / s_ref, np.asarray(a, dtype=float)))


def critic_targets(s_next, r, beta: float, actor: nn.MlpParams, critic: nn.MlpParams, s_ref: float) -> np.ndarray:
    """``y_i = r_i + beta * Q(s_{i+1}, mu(s_{i+1}))``, treated as constants."""
    a_next = policy_share(actor, s_next, s_ref)
    q_next = nn.forward(critic, critic_inputs(s_next, a_next, s_ref))[:, 0]
    return np.asarray(r, dtype=float) + beta * q_next


def critic_loss(s, a, targets, critic: nn.MlpParams, s_ref: float) -> float:
    q = nn.forward(critic, critic_inputs(s, a, s_ref))[:, 0]
    return float(np.mean((np.asarray(targets) - q) ** 2))


def critic_loss_grad(s, a, targets, critic: nn.MlpParams, s_ref: float) -> tuple[float, nn.Gradients]:
    x = critic_inputs(s, a, s_ref)
    q = nn.forward(critic, x)[:, 0]
    err = q - np.asarray(targets, dtype=float)
    upstream = (2.0 / len(err)) * err
    return float(np.mean(err * err)), nn.backward(critic, x, upstream[:, None])


def critic_update(s, a, targets, nets: Nets, config: AgentConfig) -> float:
    """One descent step on the mean squared TD error; returns the pre-update loss."""
    loss, grads = critic_loss_grad(s, a, targets, nets.critic, config.s_ref)
    grads = nn.clip_by_global_norm(grads, config.grad_clip)
    nets.critic = nets.critic_opt.update(nets.critic, grads)
    return loss


def actor_objective(s, actor: nn.MlpParams, critic: nn.MlpParams, s_ref: float) -> float:
    """Mean ``Q(s_i, mu(s_i))`` over the batch."""
    a = policy_share(actor, s, s_ref)
    return float(np.mean(nn.forward(critic, critic_inputs(s, a, s_ref))))


def actor_objective_grad(s, actor: nn.MlpParams, critic: nn.MlpParams, s_ref: float) -> tuple[float, nn.Gradients]:
    """Mean objective and gradients of its negative w.r.t. actor parameters.

    dQ/da comes from the critic's input gradient and is chained through the
    actor's backward pass.
    """
    s = np.asarray(s, dtype=float)
    x_actor = (s / s_ref)[:, None]
    a = nn.forward(actor, x_actor)[:, 0]
    x_critic = critic_inputs(s, a, s_ref)
    q = nn.forward(critic, x_critic)[:, 0]
    dq_da = nn.backward(critic, x_critic, np.ones((len(s), 1))).inputs[:, 1]
    grads = nn.backward(actor, x_actor, (-dq_da / len(s))[:, None])
    return float(np.mean(q)), grads


def actor_update(s, nets: Nets, config: AgentConfig) -> float:
    """One ascent step on mean Q along the policy; returns the pre-update objective."""
    j, grads = actor_objective_grad(s, nets.actor, nets.critic, config.s_ref)
    grads = nn.clip_by_global_norm(grads, config.grad_clip)
    nets.actor = nets.actor_opt.update(nets.actor, grads)
    return j


def soft_update(live: nn.MlpParams, target: nn.MlpParams, tau: float) -> nn.MlpParams:
    for a, b in zip(live.arrays, target.arrays):
        if a.shape != b.shape:
            raise ValueError("live and target networks differ in shape")
    if tau == 1.0:
        return live.copy()
    return target.with_arrays([tau * a + (1.0 - tau) * b for a, b in zip(live.arrays, target.arrays)])


def train_step(buffer: ReplayBuffer, nets: Nets, config: AgentConfig, rng: np.random.Generator) -> tuple[float, float]:
    s, a, r, s_next = buffer.sample_arrays(config.batch_n, rng)
    if config.target_tau == 1.0:
        y = critic_targets(s_next, r, config.beta, nets.actor, nets.critic, config.s_ref)
    else:
        y = critic_targets(s_next, r, config.beta, nets.actor_target, nets.critic_target, config.s_ref)
    loss = critic_update(s, a, y, nets, config)
    j = actor_update(s, nets, config)
    if config.target_tau < 1.0:
        nets.actor_target = soft_update(nets.actor, nets.actor_target, config.target_tau)
        nets.critic_target = soft_update(nets.critic, nets.critic_target, config.target_tau)
    return loss, j


def run_training(
    params: EnvParams,
    schedule: RegimeSchedule,
    config: AgentConfig,
    ou: OuParams = OuParams(),
    explore: ExploreSchedule = ExploreSchedule(),
    checkpoint_every: int = 0,
    greedy: bool = False,
    grid_size: int = 20,
) -> TrainResult:
    """Train for ``episodes_e`` episodes of ``periods_t`` periods.

    The replay memory and networks persist across episodes; the environment
    and the OU state are reset at each episode start. ``d_e`` is evaluated
    after training on a grid spanning the visited states, using the actor
    snapshot taken at the end of each episode.
    """
    rng = streams(config.seed)
    nets = Nets.create(config, params, rng["init"])
    noise = OuNoise(ou, rng["noise"])
    buffer = ReplayBuffer(min(config.buffer_capacity, config.episodes_e * config.periods_t))
    diag = TrainDiagnostics()
    actors: list[nn.MlpParams] = []
    snapshots: dict[int, tuple[nn.MlpParams, nn.MlpParams]] = {}
    series_rows = []
    a_lo, a_hi = params.a_lo, params.a_hi
    s_ref = config.s_ref
    t_global = 0
    n_updates = 0

    for episode in range(1, config.episodes_e + 1):
        state = growth_env.reset(params, schedule)
        noise.reset()
        xi = rng["shock"].standard_normal(config.periods_t)
        losses, objs, rewards = [], [], []
        sigma_t = 0.0
        for i in range(config.periods_t):
            sigma_t = 0.0 if greedy else sigma_at(explore, t_global)
            a_pol = float(nn.forward(nets.actor, [[state.s / s_ref]])[0, 0])
            n_t = noise.sample()
            a = explore_action(a_pol, sigma_t, n_t, a_lo, a_hi)
            nxt, r = growth_env.step(state, a, float(xi[i]), params, schedule)
            buffer.push(Transition(state.s, a, r, nxt.s))
            series_rows.append((t_global, episode, state.k, state.z, state.s, a, a * state.s, r, sigma_t))
            rewards.append(r)
            state = nxt
            t_global += 1
            if len(buffer) >= config.batch_n:
                loss, j = train_step(buffer, nets, config, rng["replay"])
                losses.append(loss)
                n_updates += 1
                objs.append(j)
        actors.append(nets.actor.copy())
        if checkpoint_every and (episode % checkpoint_every == 0 or episode == config.episodes_e):
            snapshots[episode] = (nets.actor.copy(), nets.critic.copy())
        diag.episode.append(episode)
        diag.critic_loss.append(float(np.mean(losses)) if losses else float("nan"))
        diag.neg_J.append(-float(np.mean(objs)) if objs else float("nan"))
        diag.mean_reward.append(float(np.mean(rewards)))
        diag.sigma.append(sigma_t)
        log.debug("episode %d loss %.4g reward %.4g", episode, diag.critic_loss[-1], diag.mean_reward[-1])

    series = RunArtifact.from_rows(
        ("t", "episode", "k", "z", "s", "a", "c", "r", "sigma"), series_rows
    )
    sol = ReSolution.solve(params.alpha, config.beta, schedule.base.mu, schedule.base.rho)
    grid = comparison_grid(series["k"], series["z"], grid_size)
    for actor in actors:
        diag.d_e.append(policy_distance(grid, lambda s, actor=actor: policy_share(actor, s, s_ref), sol))
    return TrainResult(nets.actor, nets.critic, diag, series, snapshots, grid, len(buffer), n_updates)


def evaluate(
    actor: nn.MlpParams,
    params: EnvParams,
    schedule: RegimeSchedule,
    horizon: int,
    seed: int,
    s_ref: float,
    ou: OuParams = OuParams(),
    sigma: float = 0.3,
    greedy: bool = False,
) -> RunArtifact:
    """Frozen-policy rollout with OU exploration at a constant scale.

    Shock draws come from the seed's shock stream, so any two evaluations
    (or an RE simulation) sharing a seed face the same ``z`` path.
    """
    rng = streams(seed)
    noise = OuNoise(ou, rng["noise"])
    sig = 0.0 if greedy else sigma

    def policy(state: EnvState) -> float:
        a_pol = float(nn.forward(actor, [[state.s / s_ref]])[0, 0])
        return explore_action(a_pol, sig, noise.sample(), params.a_lo, params.a_hi)

    return rollout(policy, params, schedule, horizon, rng["shock"])


def constant_actor(a: float, params: EnvParams, hidden: tuple[int, ...] = (64, 64)) -> nn.MlpParams:
    """Actor whose greedy share is ``a`` at every state (zero weights, tuned bias)."""
    sizes = (1, *hidden, 1)
    weights = [np.zeros((m, n)) for m, n in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(n) for n in sizes[1:]]
    biases[-1][0] = nn.squash_inverse(a, params.a_lo, params.a_hi)
    return nn.MlpParams(sizes, weights, biases, "tanh", "squash", (params.a_lo, params.a_hi))

