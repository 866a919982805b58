import math

import numpy as np
import pytest

from cmzdril.errors import ShapeError
from cmzdril.nn import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    Adam,
    GaussianPolicy,
    Tensor,
    ValueNet,
    gaussian_nll,
    load_policy,
    load_value,
    log_prob,
    sample_action,
    save_policy,
    save_value,
)
from fd import numeric_grads, relative_error


def straight_line_forward(policy, obs):
    """Independent forward pass: explicit loops, no matrix ops."""
    h = list(obs)
    n_layers = len(policy.mlp.layers)
    for li, (W, b) in enumerate(policy.mlp.layers):
        n_in, n_out = W.shape
        out = []
        for j in range(n_out):
            s = b.values[j]
            for i in range(n_in):
                s += h[i] * W.values[i, j]
            out.append(math.tanh(s) if li < n_layers - 1 else s)
        h = out
    return np.array(h)


def test_identity_linear_policy():
    policy = GaussianPolicy(2, 2, hidden=())
    W, b = policy.mlp.layers[0]
    W.values[...] = np.eye(2)
    b.values[...] = 0.0
    np.testing.assert_array_equal(policy.forward([0.3, -0.2]), [0.3, -0.2])


def test_zero_network_outputs_zero():
    policy = GaussianPolicy(4, 3, seed=1)
    for p in policy.mlp.parameters():
        p.values[...] = 0.0
    np.testing.assert_array_equal(policy.forward(np.arange(4.0)), np.zeros(3))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_forward_matches_straight_line_oracle(seed):
    rng = np.random.default_rng(seed)
    policy = GaussianPolicy(5, 3, hidden=(7, 6), seed=seed)
    for p in policy.mlp.parameters():
        p.values[...] = rng.normal(size=p.shape)
    obs = rng.normal(size=5)
    np.testing.assert_allclose(policy.forward(obs), straight_line_forward(policy, obs), rtol=0, atol=1e-12)


def test_forward_rejects_wrong_dim():
    policy = GaussianPolicy(3, 1)
    with pytest.raises(ShapeError):
        policy.forward(np.zeros(4))
    with pytest.raises(ShapeError):
        gaussian_nll(policy, np.zeros(3), np.zeros(2))


def test_nll_perfect_prediction_unit_sigma():
    policy = GaussianPolicy(2, 1, seed=0)
    obs = np.array([0.1, 0.2])
    mu = policy.forward(obs)
    assert gaussian_nll(policy, obs, mu, backward=False) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)
    assert 0.5 * math.log(2 * math.pi) == pytest.approx(0.918939, abs=1e-6)


def test_nll_unit_residual():
    policy = GaussianPolicy(2, 1, seed=0)
    for p in policy.mlp.parameters():
        p.values[...] = 0.0
    loss = gaussian_nll(policy, np.zeros(2), np.array([1.0]), backward=False)
    assert loss == pytest.approx(1.418939, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_nll_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    policy = GaussianPolicy(4, 2, hidden=(5, 4), seed=seed)
    for p in policy.mlp.parameters():
        p.values[...] = rng.normal(scale=0.7, size=p.shape)
    policy.log_std.values[...] = rng.uniform(-1, 0.5, size=2)
    obs = rng.normal(size=(6, 4))
    act = rng.normal(size=(6, 2))
    policy.zero_grad()
    gaussian_nll(policy, obs, act)
    analytic = [p.grad.copy() for p in policy.parameters()]
    numeric = numeric_grads(policy.parameters(), lambda: gaussian_nll(policy, obs, act, backward=False))
    assert relative_error(analytic, numeric) < 1e-4


def test_adam_first_step_moves_by_lr():
    w = Tensor([1.0])
    w.grad[...] = 1.0
    Adam([w], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8).step()
    # m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
    assert w.values[0] == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), abs=1e-15)
    assert w.values[0] == pytest.approx(0.9, abs=1e-8)


def test_adam_zero_gradient_is_a_no_op():
    w = Tensor([0.7, -0.3])
    opt = Adam([w], lr=0.1)
    for _ in range(5):
        opt.step()
    np.testing.assert_array_equal(w.values, [0.7, -0.3])
    assert opt.t == 5


def test_adam_on_quadratic_matches_reference_recursion():
    w = Tensor([1.0])
    opt = Adam([w], lr=0.05)
    # reference: scalar recursion written out directly
    x, m, v = 1.0, 0.0, 0.0
    for t in range(1, 101):
        w.zero_grad()
        w.grad[0] = 2.0 * w.values[0]
        opt.step()
        g = 2.0 * x
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x -= 0.05 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert w.values[0] == pytest.approx(x, abs=1e-12)
    assert abs(w.values[0]) < 0.1


def test_adam_moments_match_parameter_shapes():
    policy = GaussianPolicy(3, 2, hidden=(4,))
    opt = Adam(policy.parameters())
    for p, m, v in zip(policy.parameters(), opt.m, opt.v):
        assert m.shape == p.shape == v.shape


def test_sample_with_vanishing_noise_returns_mean():
    policy = GaussianPolicy(3, 2, seed=3)
    policy.log_std.values[...] = -20.0
    obs = np.array([0.5, -1.0, 0.2])
    action, _ = sample_action(policy, obs, np.random.default_rng(0))
    np.testing.assert_allclose(action, policy.forward(obs), atol=1e-6)


def test_log_prob_is_negative_nll():
    policy = GaussianPolicy(3, 2, seed=4)
    policy.log_std.values[...] = [-0.3, 0.4]
    obs = np.array([0.1, 0.2, -0.3])
    action, lp = sample_action(policy, obs, np.random.default_rng(1))
    assert lp + gaussian_nll(policy, obs, action, backward=False) == pytest.approx(0.0, abs=1e-10)
    assert log_prob(policy, obs, action)[0] == pytest.approx(lp, abs=1e-12)


def test_sample_mean_monte_carlo():
    policy = GaussianPolicy(2, 3, seed=5)
    policy.log_std.values[...] = [-1.0, 0.0, 0.5]
    obs = np.array([0.3, 0.7])
    n = 100_000
    actions, _ = sample_action(policy, np.tile(obs, (n, 1)), np.random.default_rng(2))
    mu = policy.forward(obs)
    bound = 3.0 * policy.std / math.sqrt(n)
    assert np.all(np.abs(actions.mean(axis=0) - mu) < bound)


def test_same_seed_same_parameters():
    a = GaussianPolicy(6, 2, seed=11)
    b = GaussianPolicy(6, 2, seed=11)
    c = GaussianPolicy(6, 2, seed=12)
    assert a.flat_parameters().tobytes() == b.flat_parameters().tobytes()
    assert a.flat_parameters().tobytes() != c.flat_parameters().tobytes()


def test_std_positive_and_clamp():
    policy = GaussianPolicy(2, 2)
    assert np.all(policy.std > 0)
    policy.log_std.values[...] = [-9.0, 7.0]
    policy.clamp_log_std()
    np.testing.assert_array_equal(policy.log_std.values, [LOG_STD_MIN, LOG_STD_MAX])


def test_zero_grad_clears_everything():
    policy = GaussianPolicy(3, 1, seed=0)
    gaussian_nll(policy, np.ones((4, 3)), np.ones((4, 1)))
    assert any(np.any(p.grad != 0) for p in policy.parameters())
    policy.zero_grad()
    assert all(np.all(p.grad == 0) for p in policy.parameters())
    for p in policy.parameters():
        assert p.values.size == p.grad.size == int(np.prod(p.shape))


def test_clone_is_independent():
    a = GaussianPolicy(3, 1, seed=0)
    b = a.clone()
    b.log_std.values[0] = 1.0
    assert a.log_std.values[0] == 0.0


def test_policy_checkpoint_roundtrip_is_bit_exact(tmp_path):
    policy = GaussianPolicy(5, 2, hidden=(8, 3), seed=9)
    policy.log_std.values[...] = [-0.123456789, 1.5]
    path = tmp_path / "p.ckpt"
    save_policy(policy, path)
    loaded = load_policy(path)
    assert loaded.hidden == (8, 3)
    assert loaded.flat_parameters().tobytes() == policy.flat_parameters().tobytes()
    save_policy(loaded, tmp_path / "q.ckpt")
    assert (tmp_path / "p.ckpt").read_bytes() == (tmp_path / "q.ckpt").read_bytes()


def test_value_checkpoint_roundtrip(tmp_path):
    net = ValueNet(4, seed=2)
    save_value(net, tmp_path / "v.ckpt")
    loaded = load_value(tmp_path / "v.ckpt")
    obs = np.random.default_rng(0).normal(size=(3, 4))
    np.testing.assert_array_equal(net.predict(obs), loaded.predict(obs))
