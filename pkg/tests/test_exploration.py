import numpy as np
import pytest
from hypothesis import given, strategies as st

from growthlab.exploration import (
    ExploreSchedule, OuNoise, OuParams, explore_action, ou_path, ou_step, sigma_at,
)


def test_ou_step_examples():
    p = OuParams(theta=0.15, mu_bar=0.4, sigma_ou=0.2)
    assert ou_step(0.4, p, 0.0) == 0.4
    assert ou_step(1.0, OuParams(0.15, 0.0, 0.2), 0.0) == pytest.approx(0.85)


def test_ou_path_moments():
    p = OuParams(0.15, 0.0, 0.2)
    x = ou_path(200_000, p, np.random.default_rng(0))[1000:]
    assert p.stationary_variance == pytest.approx(0.144144, abs=1e-6)
    assert x.var() == pytest.approx(p.stationary_variance, rel=0.05)
    assert abs(x.mean()) < 0.02


def test_ou_noise_resets_to_zero():
    noise = OuNoise(OuParams(), np.random.default_rng(0))
    for _ in range(5):
        noise.sample()
    noise.reset()
    assert noise.x == 0.0


def test_ou_params_invariants():
    with pytest.raises(ValueError):
        OuParams(theta=0.0)
    with pytest.raises(ValueError):
        OuParams(sigma_ou=0.0)


def test_sigma_schedule_examples():
    s = ExploreSchedule(1.0, 0.3, 1000)
    assert sigma_at(s, 0) == 1.0
    assert sigma_at(s, 500) == pytest.approx(0.65)
    assert sigma_at(s, 1000) == 0.3
    assert sigma_at(s, 10**7) == 0.3


def test_schedule_invariants():
    with pytest.raises(ValueError):
        ExploreSchedule(0.2, 0.3, 10)
    with pytest.raises(ValueError):
        ExploreSchedule(1.0, 0.0, 10)


@given(st.integers(0, 5000), st.integers(0, 5000))
def test_sigma_non_increasing(t1, t2):
    s = ExploreSchedule(1.0, 0.3, 2000)
    lo, hi = sorted((t1, t2))
    assert sigma_at(s, hi) <= sigma_at(s, lo)
    assert sigma_at(s, hi) >= 0.3


def test_explore_action_examples():
    assert explore_action(0.5, 0.3, 0.0) == 0.5
    assert explore_action(0.5, 0.3, 0.2) == pytest.approx(0.56)
    assert explore_action(0.99, 0.3, 1.0, 0.001, 0.999) == 0.999


@given(st.floats(0.001, 0.999), st.floats(0.0, 1.0), st.floats(-100, 100))
def test_explore_action_within_bounds(a, sigma, noise):
    assert 0.001 <= explore_action(a, sigma, noise) <= 0.999
