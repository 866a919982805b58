"""Small dense networks with hand-written reverse-mode gradients.

Everything is float64. Topology is fixed (stacked tanh layers, linear head),
so backprop is written out per layer instead of going through a tape.
"""

import copy
import math

import numpy as np

from . import blob
from .errors import ShapeError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Tensor:
    """A parameter array with an accumulated gradient of the same shape."""

    __slots__ = ("values", "grad")

    def __init__(self, values):
        self.values = np.array(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


def _orthogonal(rng, n_in, n_out, gain):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


class MLP:
    """tanh hidden layers followed by a linear output layer."""

    def __init__(self, sizes, rng, hidden_gain=1.0, out_gain=0.01):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.layers = []
        n = len(self.sizes) - 1
        for i, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            gain = out_gain if i == n - 1 else hidden_gain
            self.layers.append((Tensor(_orthogonal(rng, a, b, gain)), Tensor(np.zeros(b))))

    def parameters(self):
        return [t for layer in self.layers for t in layer]

    def forward(self, x):
        """Return ``(output, cache)``; ``cache`` holds each layer's input."""
        cache = [x]
        h = x
        last = len(self.layers) - 1
        for i, (W, b) in enumerate(self.layers):
            h = h @ W.values + b.values
            if i != last:
                h = np.tanh(h)
            cache.append(h)
        return h, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Accumulate parameter gradients given dLoss/dOutput."""
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            W, b = self.layers[i]
            h_in = cache[i]
            W.grad += h_in.T @ g
            b.grad += g.sum(axis=0)
            if i > 0:
                g = (g @ W.values.T) * (1.0 - h_in * h_in)


class GaussianPolicy:
    """Diagonal Gaussian policy: MLP mean and a state-independent log-std."""

    def __init__(self, obs_dim, act_dim, hidden=(64, 64), seed=0, log_std_init=0.0):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.hidden = tuple(int(h) for h in hidden)
        rng = np.random.default_rng(seed)
        self.mlp = MLP((self.obs_dim, *self.hidden, self.act_dim), rng, hidden_gain=1.0, out_gain=0.01)
        self.log_std = Tensor(np.full(self.act_dim, float(log_std_init)))

    def parameters(self):
        return self.mlp.parameters() + [self.log_std]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    @property
    def std(self):
        return np.exp(self.log_std.values)

    def _as_batch(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim == 1:
            obs = obs[None, :]
        if obs.ndim != 2 or obs.shape[1] != self.obs_dim:
            raise ShapeError(f"expected observations of length {self.obs_dim}, got shape {obs.shape}")
        return obs

    def mean(self, obs):
        """Batched action means, shape (B, act_dim)."""
        return self.mlp(self._as_batch(obs))

    def forward(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim != 1:
            raise ShapeError("forward takes a single observation vector")
        return self.mean(obs)[0]

    def clamp_log_std(self):
        np.clip(self.log_std.values, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std.values)

    def clone(self):
        return copy.deepcopy(self)

    def flat_parameters(self):
        return np.concatenate([p.values.ravel() for p in self.parameters()])


class ValueNet:
    """State-value MLP with the policy trunk's shape and a scalar head."""

    def __init__(self, obs_dim, hidden=(64, 64), seed=0):
        self.obs_dim = int(obs_dim)
        self.hidden = tuple(int(h) for h in hidden)
        rng = np.random.default_rng(seed)
        self.mlp = MLP((self.obs_dim, *self.hidden, 1), rng, hidden_gain=1.0, out_gain=1.0)

    def parameters(self):
        return self.mlp.parameters()

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def predict(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        single = obs.ndim == 1
        if single:
            obs = obs[None, :]
        if obs.shape[1] != self.obs_dim:
            raise ShapeError(f"expected observations of length {self.obs_dim}, got shape {obs.shape}")
        v = self.mlp(obs)[:, 0]
        return v[0] if single else v

    def clone(self):
        return copy.deepcopy(self)


def _check_actions(policy, actions, batch):
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim == 1:
        actions = actions[None, :]
    if actions.shape != (batch, policy.act_dim):
        raise ShapeError(f"expected actions of shape {(batch, policy.act_dim)}, got {actions.shape}")
    return actions


def log_prob(policy, obs, actions):
    """Per-sample log density of ``actions`` under the policy, shape (B,)."""
    obs = policy._as_batch(obs)
    actions = _check_actions(policy, actions, obs.shape[0])
    mu = policy.mlp(obs)
    log_std = policy.log_std.values
    z = (actions - mu) / np.exp(log_std)
    return -(log_std.sum() + policy.act_dim * HALF_LOG_2PI + 0.5 * (z * z).sum(axis=1))


def gaussian_nll(policy, obs, actions, backward=True):
    """Mean over the batch of the summed per-dimension Gaussian NLL.

    With ``backward=True`` the gradient is accumulated into the policy's
    parameter tensors (callers zero them first).
    """
    obs = policy._as_batch(obs)
    actions = _check_actions(policy, actions, obs.shape[0])
    B = obs.shape[0]
    mu, cache = policy.mlp.forward(obs)
    log_std = policy.log_std.values
    inv_std = np.exp(-log_std)
    z = (actions - mu) * inv_std
    per_sample = log_std.sum() + policy.act_dim * HALF_LOG_2PI + 0.5 * (z * z).sum(axis=1)
    loss = float(per_sample.mean())
    if backward:
        policy.mlp.backward(cache, -(z * inv_std) / B)
        policy.log_std.grad += (1.0 - z * z).sum(axis=0) / B
    return loss


def entropy(policy):
    return float(np.sum(policy.log_std.values + 0.5 + HALF_LOG_2PI))


def sample_action(policy, obs, rng):
    """Draw ``mu + sigma * z``. Returns ``(action, log_prob)``; batched if ``obs`` is 2-D."""
    single = np.asarray(obs).ndim == 1
    obs = policy._as_batch(obs)
    mu = policy.mlp(obs)
    log_std = policy.log_std.values
    z = rng.standard_normal(mu.shape)
    action = mu + np.exp(log_std) * z
    lp = -(log_std.sum() + policy.act_dim * HALF_LOG_2PI + 0.5 * (z * z).sum(axis=1))
    if single:
        return action[0], float(lp[0])
    return action, lp


class Adam:
    """Adam with bias correction over a fixed list of Tensors."""

    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.values -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if max_norm is not None and total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total


# --------------------------------------------------------------------------
# checkpoints


def save_policy(policy, path):
    header = {
        "model": "GaussianPolicy",
        "obs_dim": policy.obs_dim,
        "act_dim": policy.act_dim,
        "hidden": list(policy.hidden),
    }
    blob.write(path, "policy", header, [p.values for p in policy.parameters()])


def load_policy(path):
    header, arrays = blob.read(path, "policy")
    policy = GaussianPolicy(header["obs_dim"], header["act_dim"], hidden=header["hidden"])
    params = policy.parameters()
    if len(arrays) != len(params):
        raise blob.FormatError("parameter count mismatch")
    for p, arr in zip(params, arrays):
        if arr.shape != p.shape:
            raise blob.FormatError(f"shape mismatch {arr.shape} vs {p.shape}")
        p.values[...] = arr
    return policy


def save_value(value_net, path):
    header = {"model": "ValueNet", "obs_dim": value_net.obs_dim, "hidden": list(value_net.hidden)}
    blob.write(path, "value", header, [p.values for p in value_net.parameters()])


def load_value(path):
    header, arrays = blob.read(path, "value")
    net = ValueNet(header["obs_dim"], hidden=header["hidden"])
    for p, arr in zip(net.parameters(), arrays):
        p.values[...] = arr
    return net
