import math

import pytest
from hypothesis import given, strategies as st

from growthlab.env import (
    EnvParams, EnvState, RegimeSchedule, ShockParams, make_state, output, regime_at, reset, shock_next, step,
)

BASE = ShockParams(0.1, 0.0, 0.0)


def test_output_examples():
    assert output(1.0, 0.4) == 1.0
    assert output(4.0, 0.5) == 2.0
    # 2**0.4 evaluated to 30 digits with mpmath
    assert output(2.0, 0.4) == pytest.approx(1.319507910772894, abs=1e-6)


@pytest.mark.parametrize("k", [0.0, -1.0])
def test_output_rejects_nonpositive_capital(k):
    with pytest.raises(ValueError):
        output(k, 0.4)


def test_shock_next_examples():
    assert shock_next(5.0, ShockParams(0.1, 0.0), 0.0) == pytest.approx(math.exp(0.1))
    assert shock_next(1.0, ShockParams(0.1, 0.7), 0.0) == pytest.approx(1.105171, abs=1e-6)
    assert shock_next(2.0, ShockParams(3.0, 0.0), 0.0) == pytest.approx(20.085537, abs=1e-6)
    with pytest.raises(ValueError):
        shock_next(0.0, ShockParams(), 0.0)


def test_step_reward_and_clip():
    p = EnvParams()
    sched = RegimeSchedule(BASE)
    state = EnvState(1.0, 2.0, 2.0, 0)  # s = 2 with k = 1
    _, r = step(state, 0.5, 0.0, p, sched)
    assert r == 0.0
    nxt, r_hi = step(state, 1.5, 0.0, p, sched)
    assert r_hi == pytest.approx(math.log(0.999 * 2.0))
    assert nxt.k == pytest.approx(0.001 * 2.0)


def test_step_transition_value():
    p = EnvParams(alpha=0.4)
    nxt, _ = step(make_state(1.0, 1.0, 0, 0.4), 0.25, 0.0, p, RegimeSchedule(BASE))
    assert nxt.k == 0.75
    # exp(0.1) * 0.75**0.4 to 30 digits: 0.98504019751709699...
    assert nxt.s == pytest.approx(0.985040197517097, abs=1e-5)
    assert nxt.t == 1


def test_reset_examples():
    assert reset(EnvParams(k0=1.0, z0=1.0)).s == 1.0
    assert reset(EnvParams(alpha=0.5, k0=4.0, z0=1.0)).s == 2.0
    s = reset(EnvParams(k0=2.0, z0=math.exp(0.1))).s
    assert s == pytest.approx(1.458281769156959, abs=1e-5)
    default = reset(EnvParams(), RegimeSchedule(ShockParams(mu=3.0)))
    assert default.z == pytest.approx(math.exp(3.0)) and default.k == 1.0 and default.t == 0


def test_regime_at():
    new = ShockParams(0.1, 0.7, 0.1)
    over = ShockParams(3.0, 0.0, 0.1)
    assert regime_at(RegimeSchedule(BASE), 57) == BASE
    sched = RegimeSchedule(BASE, permanent_changes=((200, new),))
    assert regime_at(sched, 199) == BASE
    assert regime_at(sched, 200) == new
    assert regime_at(sched, 10_000) == new
    sched = RegimeSchedule(BASE, one_period_overrides=((100, over),))
    assert regime_at(sched, 100) == over
    assert regime_at(sched, 101) == BASE
    both = RegimeSchedule(BASE, permanent_changes=((50, new),), one_period_overrides=((100, over),))
    assert regime_at(both, 100) == over
    assert regime_at(both, 101) == new


def test_schedule_rejects_unordered_periods():
    with pytest.raises(ValueError):
        RegimeSchedule(BASE, permanent_changes=((5, BASE), (5, BASE)))


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha=1.0), dict(k_min=0.0), dict(a_lo=0.5, a_hi=0.4), dict(z0=-1.0), dict(k0=5000.0)],
)
def test_env_params_invariants(kwargs):
    with pytest.raises(ValueError):
        EnvParams(**kwargs)


def test_shock_params_invariants():
    with pytest.raises(ValueError):
        ShockParams(rho=1.0)
    with pytest.raises(ValueError):
        ShockParams(eps_sigma=-0.1)


def test_constant_shock_without_noise():
    p = EnvParams()
    sched = RegimeSchedule(ShockParams(0.3, 0.0, 0.0))
    state = reset(p, sched)
    for _ in range(20):
        state, _ = step(state, 0.6, 1.7, p, sched)
        assert state.z == pytest.approx(math.exp(0.3), rel=1e-15)


states = st.builds(
    lambda k, z: make_state(k, z, 0, 0.4),
    st.floats(1e-3, 500.0),
    st.floats(1e-2, 50.0),
)


@given(states, st.floats(-2.0, 2.0), st.floats(-3.0, 3.0))
def test_step_properties(state, a_raw, xi):
    p = EnvParams()
    sched = RegimeSchedule(ShockParams(0.1, 0.5, 0.1))
    nxt, r = step(state, a_raw, xi, p, sched)
    assert r >= p.r_min
    assert nxt.s == pytest.approx(nxt.z * nxt.k**p.alpha, rel=1e-15)
    assert p.k_min <= nxt.k <= p.k_max
    a = min(max(a_raw, p.a_lo), p.a_hi)
    c = a * state.s
    pre_clip_k = (1.0 - a) * state.s
    assert c + pre_clip_k == pytest.approx(state.s, rel=1e-15)


@given(states, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_step_monotone_in_action(state, a1, a2):
    p = EnvParams()
    sched = RegimeSchedule(BASE)
    lo, hi = sorted((a1, a2))
    n_lo, r_lo = step(state, lo, 0.0, p, sched)
    n_hi, r_hi = step(state, hi, 0.0, p, sched)
    assert r_hi >= r_lo
    assert n_hi.k <= n_lo.k
