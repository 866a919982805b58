import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmzdril.envs import EnvStep
from cmzdril.errors import ConfigurationError
from cmzdril.reward import (
    ShaperConfig,
    ShaperMode,
    ShaperState,
    calibrate_dril_threshold,
    cmz_reward,
    dril_reward,
    penalty_reward,
    shape,
)
from test_imitation import FixedEnsemble, toy_demos


def step(reward=-0.01):
    return EnvStep(np.zeros(3), reward, False)


def cmz_oracle(us, alpha=10.0, gamma=0.99, u_bar=0.0):
    """Plain-loop reference of the reward-then-update recursion."""
    out = []
    for u in us:
        out.append(-alpha * (u - u_bar))
        u_bar = gamma * u_bar + (1 - gamma) * u
    return out, u_bar


def test_first_step_values():
    r, s = cmz_reward(ShaperState(), 0.2)
    assert r == pytest.approx(-2.0, abs=1e-15)
    assert s.u_bar == pytest.approx(0.002, abs=1e-15)


def test_reward_uses_average_before_update():
    # a post-update implementation would give -10 * (0.2 - 0.002) = -1.98
    r, _ = cmz_reward(ShaperState(u_bar=0.0), 0.2)
    assert r != pytest.approx(-1.98)


def test_steady_disagreement_is_unrewarded():
    r, s = cmz_reward(ShaperState(u_bar=0.37), 0.37)
    assert r == 0.0 and s.u_bar == pytest.approx(0.37)


def test_constant_u_geometric_closed_form():
    c, T, alpha, gamma = 0.3, 1000, 10.0, 0.99
    s = ShaperState()
    rs = []
    for _ in range(T):
        r, s = cmz_reward(s, c)
        rs.append(r)
    expected = -alpha * c * gamma ** np.arange(T)
    np.testing.assert_allclose(rs, expected, rtol=1e-9, atol=1e-12)
    assert sum(rs) == pytest.approx(-alpha * c * (1 - gamma**T) / (1 - gamma), rel=1e-9)
    assert abs(np.mean(rs)) < 0.31


@settings(max_examples=50, deadline=None)
@given(us=st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=50))
def test_cmz_matches_reference_loop(us):
    s = ShaperState()
    got = []
    for u in us:
        r, s = cmz_reward(s, u)
        got.append(r)
    ref, u_bar = cmz_oracle(us)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)
    assert s.u_bar == pytest.approx(u_bar, rel=1e-12, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(ub=st.floats(0, 5), u=st.floats(0, 5))
def test_running_average_stays_between_inputs(ub, u):
    _, s = cmz_reward(ShaperState(u_bar=ub), u)
    assert min(ub, u) - 1e-12 <= s.u_bar <= max(ub, u) + 1e-12


def test_negative_disagreement_rejected():
    with pytest.raises(ValueError):
        cmz_reward(ShaperState(), -0.1)
    with pytest.raises(ValueError):
        penalty_reward(ShaperState(), -0.1)


def test_state_validation():
    with pytest.raises(ConfigurationError):
        ShaperState(alpha=0.0)
    with pytest.raises(ConfigurationError):
        ShaperState(gamma=1.0)
    assert ShaperState(u_bar=0.4, u_bar0=0.1).reset().u_bar == 0.1


def test_dril_reward_signs():
    s = ShaperState(mode="dril", dril_threshold=0.5)
    assert dril_reward(s, 0.1) == 1.0
    assert dril_reward(s, 0.9) == -1.0
    with pytest.raises(ConfigurationError):
        dril_reward(ShaperState(mode="dril"), 0.1)


def test_penalty_reward():
    s = ShaperState(mode="penalty")
    assert penalty_reward(s, 0.0) == 0.0
    assert penalty_reward(s, 0.2) == pytest.approx(-2.0)


@settings(max_examples=50, deadline=None)
@given(us=st.lists(st.floats(0, 3), min_size=1, max_size=30))
def test_penalty_sum_is_nonpositive(us):
    s = ShaperState(mode="penalty")
    total = sum(penalty_reward(s, u) for u in us)
    assert total <= 0.0
    if any(u > 0 for u in us):
        assert total < 0.0


def test_shape_dispatch():
    assert shape(ShaperState(mode="zero"), step(5.0), 0.7) == (0.0, ShaperState(mode="zero"))
    assert shape(ShaperState(mode="true_env"), step(-0.01), 0.7)[0] == -0.01
    us = [0.2, 0.5, 0.1, 0.0, 0.3]
    s = ShaperState()
    got = []
    for u in us:
        r, s = shape(s, step(), u)
        got.append(r)
    assert got == cmz_oracle(us)[0]


def test_config_builds_state():
    state = ShaperConfig(mode="dril", dril_threshold=0.3).initial_state()
    assert state.mode is ShaperMode.DRIL and state.dril_threshold == 0.3
    assert ShaperConfig(mode="dril").initial_state(0.7).dril_threshold == 0.7


def _ensemble_with_u(values):
    # two members at +-u give population std u for a single action dim
    u = np.asarray(values)[:, None]
    return FixedEnsemble([u, -u])


def test_quantile_interpolates():
    demos = toy_demos(n_eps=1, T=4)
    assert calibrate_dril_threshold(_ensemble_with_u([0.1, 0.2, 0.3, 0.4]), demos, q=0.5) == pytest.approx(0.25)
    assert calibrate_dril_threshold(_ensemble_with_u([0.1, 0.4, 0.3, 0.2]), demos, q=1.0) == pytest.approx(0.4)
    assert calibrate_dril_threshold(_ensemble_with_u([0.0] * 4), demos) == 0.0
    with pytest.raises(ConfigurationError):
        calibrate_dril_threshold(_ensemble_with_u([0.1] * 4), demos, q=0.0)


def test_calibrated_threshold_pass_rate():
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 1, 500)
    demos = toy_demos(n_eps=1, T=500)
    q = 0.8
    thr = calibrate_dril_threshold(_ensemble_with_u(u), demos, q=q)
    s = ShaperState(mode="dril", dril_threshold=thr)
    frac = np.mean([dril_reward(s, x) == 1.0 for x in u])
    assert abs(frac - q) <= 0.05


@settings(max_examples=50, deadline=None)
@given(us=st.lists(st.floats(0, 2), min_size=1, max_size=200), ub0=st.floats(0, 1))
def test_reward_sum_telescopes(us, ub0):
    # u_bar_{i+1} - u_bar_i = (1 - gamma)(u_i - u_bar_i), so sum r = -alpha (u_bar_T - u_bar_0) / (1 - gamma)
    s = ShaperState(u_bar=ub0)
    total = 0.0
    for u in us:
        r, s = cmz_reward(s, u)
        total += r
    assert total == pytest.approx(-10.0 * (s.u_bar - ub0) / 0.01, rel=1e-7, abs=1e-7)
