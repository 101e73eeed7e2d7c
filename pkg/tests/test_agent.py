import numpy as np
import pytest

from growthlab import nn
from growthlab.agent import (
    AgentConfig, Nets, actor_objective, actor_objective_grad, actor_update, constant_actor, critic_loss,
    critic_targets, critic_update, evaluate, policy_share, run_training, soft_update,
)
from growthlab.env import EnvParams, RegimeSchedule, ShockParams
from growthlab.exploration import ExploreSchedule

from test_nn import assert_close_grad, fd_gradient

ENV = EnvParams()
SCHED = RegimeSchedule(ShockParams(3.0, 0.0, 0.1))


def const_critic(value, hidden=(4,)):
    sizes = (2, *hidden, 1)
    w = [np.zeros((m, n)) for m, n in zip(sizes[:-1], sizes[1:])]
    b = [np.zeros(n) for n in sizes[1:]]
    b[-1][0] = value
    return nn.MlpParams(sizes, w, b)


def batch(rng, n=16):
    s = rng.uniform(5, 80, n)
    a = rng.uniform(0.1, 0.9, n)
    r = np.log(a * s)
    s_next = rng.uniform(5, 80, n)
    return s, a, r, s_next


def make_nets(seed=0, optimizer="sgd", **kw):
    cfg = AgentConfig(seed=seed, optimizer=optimizer, **kw)
    return cfg, Nets.create(cfg, ENV, np.random.default_rng(seed))


def test_critic_targets_examples(rng):
    s, a, r, s_next = batch(rng)
    cfg, nets = make_nets()
    np.testing.assert_array_equal(critic_targets(s_next, r, 0.0, nets.actor, nets.critic, 30.0), r)
    np.testing.assert_array_equal(critic_targets(s_next, r, 0.99, nets.actor, const_critic(0.0), 30.0), r)
    y = critic_targets(s_next[:1], [1.0], 0.99, nets.actor, const_critic(2.0), 30.0)
    assert y[0] == pytest.approx(2.98, abs=1e-14)


def test_critic_loss_examples(rng):
    s, a, _, _ = batch(rng, 3)
    critic = const_critic(1.5)
    assert critic_loss(s, a, np.full(3, 1.5), critic, 30.0) == 0.0
    assert critic_loss(s, a, np.full(3, 1.5 + 0.7), critic, 30.0) == pytest.approx(0.49)
    # hand mean of squares: (0.01 + 0.04 + 0.09) / 3
    y = 1.5 - np.array([0.1, -0.2, 0.3])
    assert critic_loss(s, a, y, critic, 30.0) == pytest.approx(0.046666666666666667, abs=1e-9)


def test_critic_update_zero_error_and_zero_rate(rng):
    s, a, _, _ = batch(rng)
    cfg, nets = make_nets()
    q = nn.forward(nets.critic, np.column_stack((s / 30.0, a)))[:, 0]
    before = nets.critic.copy()
    critic_update(s, a, q, nets, cfg)
    assert all(np.allclose(x, y, atol=1e-15, rtol=0) for x, y in zip(before.arrays, nets.critic.arrays))
    cfg0, nets0 = make_nets(eta_critic=0.0)
    before = nets0.critic.copy()
    critic_update(s, a, np.zeros_like(s), nets0, cfg0)
    assert all(np.array_equal(x, y) for x, y in zip(before.arrays, nets0.critic.arrays))


def test_critic_update_descends(rng):
    s, a, r, _ = batch(rng)
    cfg = AgentConfig(eta_critic=1e-3, grad_clip=0.0)
    critic = nn.MlpParams((2, 1), [np.array([[0.0], [0.0]])], [np.array([0.2])])
    nets = Nets(nn.init((1, 4, 1), rng, "tanh", "squash"), critic, None, None, nn.Sgd(1e-4), nn.Sgd(1e-3))
    pre = critic_update(s, a, r, nets, cfg)
    post = critic_loss(s, a, r, nets.critic, cfg.s_ref)
    assert post < pre


def test_actor_update_flat_critic_and_zero_rate(rng):
    s, *_ = batch(rng)
    cfg, nets = make_nets()
    nets.critic = const_critic(3.0)
    before = nets.actor.copy()
    actor_update(s, nets, cfg)
    assert all(np.array_equal(x, y) for x, y in zip(before.arrays, nets.actor.arrays))
    cfg0, nets0 = make_nets(eta_actor=0.0)
    before = nets0.actor.copy()
    actor_update(s, nets0, cfg0)
    assert all(np.array_equal(x, y) for x, y in zip(before.arrays, nets0.actor.arrays))


def test_actor_objective_gradient_matches_finite_differences(rng):
    s, *_ = batch(rng, 8)
    actor = nn.init((1, 6, 5, 1), rng, "tanh", "squash")
    critic = nn.init((2, 7, 1), rng)
    critic.biases[0][:] = rng.normal(size=7)
    j, g = actor_objective_grad(s, actor, critic, 30.0)
    assert j == pytest.approx(actor_objective(s, actor, critic, 30.0))
    neg_j = lambda: -actor_objective(s, actor, critic, 30.0)
    assert_close_grad(g.arrays, fd_gradient(neg_j, actor.arrays))


def test_updates_do_not_leak(rng):
    s, a, r, s_next = batch(rng)
    cfg, nets = make_nets(optimizer="adam")
    actor0, critic0 = nets.actor.copy(), nets.critic.copy()
    y = critic_targets(s_next, r, cfg.beta, nets.actor, nets.critic, cfg.s_ref)
    y_copy = y.copy()
    critic_update(s, a, y, nets, cfg)
    assert all(np.array_equal(x, z) for x, z in zip(actor0.arrays, nets.actor.arrays))
    assert np.array_equal(y, y_copy)
    critic1 = nets.critic.copy()
    actor_update(s, nets, cfg)
    assert all(np.array_equal(x, z) for x, z in zip(critic1.arrays, nets.critic.arrays))
    assert not all(np.array_equal(x, z) for x, z in zip(critic0.arrays, critic1.arrays))


def test_soft_update_examples():
    live = nn.MlpParams((1, 1), [np.ones((1, 1))], [np.ones(1)])
    target = nn.MlpParams((1, 1), [np.zeros((1, 1))], [np.zeros(1)])
    assert soft_update(live, target, 1.0).weights[0][0, 0] == 1.0
    assert soft_update(live, target, 0.0).weights[0][0, 0] == 0.0
    assert soft_update(live, target, 0.01).weights[0][0, 0] == pytest.approx(0.01)
    other = nn.MlpParams((1, 2), [np.zeros((1, 2))], [np.zeros(2)])
    with pytest.raises(ValueError):
        soft_update(live, other, 0.5)


@pytest.mark.parametrize(
    "kwargs", [dict(beta=1.5), dict(periods_t=10, batch_n=64), dict(target_tau=0.0), dict(optimizer="rmsprop")]
)
def test_agent_config_invariants(kwargs):
    with pytest.raises(ValueError):
        AgentConfig(**kwargs)


def test_warmup_boundary():
    cfg = AgentConfig(episodes_e=1, periods_t=64, batch_n=64)
    res = run_training(ENV, SCHED, cfg)
    assert res.buffer_count == 64
    assert res.n_updates == 1
    assert len(res.diagnostics.episode) == 1


def test_training_is_deterministic():
    cfg = AgentConfig(episodes_e=2, periods_t=80, batch_n=16, optimizer="adam", target_tau=0.05, seed=11)
    a = run_training(ENV, SCHED, cfg)
    b = run_training(ENV, SCHED, cfg)
    assert list(a.diagnostics.rows()) == list(b.diagnostics.rows())
    assert np.array_equal(a.series["c"], b.series["c"])
    c = run_training(ENV, SCHED, AgentConfig(**{**cfg.__dict__, "seed": 12}))
    assert list(a.diagnostics.rows()) != list(c.diagnostics.rows())


def test_greedy_frozen_actor_executes_policy():
    cfg = AgentConfig(episodes_e=1, periods_t=70, batch_n=16, eta_actor=0.0, eta_critic=0.0)
    res = run_training(ENV, SCHED, cfg, greedy=True)
    share = np.array([policy_share(res.actor, [s], cfg.s_ref)[0] for s in res.series["s"]])
    np.testing.assert_array_equal(res.series["a"], np.clip(share, ENV.a_lo, ENV.a_hi))
    assert np.all(res.series["sigma"] == 0.0)


def test_diagnostics_are_finite_and_per_episode():
    cfg = AgentConfig(episodes_e=3, periods_t=40, batch_n=8, optimizer="adam")
    res = run_training(ENV, SCHED, cfg, explore=ExploreSchedule(1.0, 0.3, 60), checkpoint_every=2)
    d = res.diagnostics.as_arrays()
    assert all(len(v) == 3 for v in d.values())
    assert all(np.all(np.isfinite(v)) for v in d.values())
    assert d["sigma"][-1] == 0.3
    assert sorted(res.snapshots) == [2, 3]


def test_constant_actor_and_evaluate_pairing():
    actor = constant_actor(0.604, ENV)
    assert policy_share(actor, [1.0, 50.0, 300.0], 30.0) == pytest.approx(0.604, abs=1e-15)
    a = evaluate(actor, ENV, SCHED, 60, 4, 30.0, sigma=0.3)
    b = evaluate(constant_actor(0.2, ENV), ENV, SCHED, 60, 4, 30.0, sigma=0.6)
    assert np.array_equal(a["z"][:1], b["z"][:1])
    xa = np.log(a["z"][1:])
    xb = np.log(b["z"][1:])
    np.testing.assert_allclose(xa, xb, rtol=0, atol=1e-12)


@pytest.mark.slow
def test_default_config_loss_falls():
    res = run_training(ENV, SCHED, AgentConfig(seed=0))
    loss = np.array(res.diagnostics.critic_loss)
    assert loss[-10:].mean() < loss[:10].mean()
