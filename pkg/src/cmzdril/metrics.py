"""Evaluation metrics: true reward, discrete Frechet distance, action MSE, smoothing."""

import csv

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ConfigurationError, ShapeError
from .kernels import frechet_dp

METRICS_COLUMNS = ["epoch", "reward_raw", "reward_smooth", "frechet_raw", "frechet_smooth", "mse_raw", "mse_smooth"]


def _as_trace(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError("a trace needs at least one point")
    if not np.all(np.isfinite(a)):
        raise ValueError("trace contains non-finite values")
    return a


def frechet_distance(a, b):
    """Discrete Frechet distance between two point sequences (Euclidean metric)."""
    a, b = _as_trace(a), _as_trace(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError("traces live in different dimensions")
    return frechet_dp(a, b)


def action_mse(policy, demos):
    """Mean over all pairs and action dims of (policy mean - expert action)^2."""
    if demos.obs_dim != policy.obs_dim or demos.act_dim != policy.act_dim:
        raise ShapeError("demo dims do not match the policy")
    obs, act = demos.observations(), demos.actions()
    if obs.shape[0] == 0:
        raise ValueError("empty demo set")
    diff = policy.mean(obs) - act
    return float(np.mean(diff * diff))


def rollout(policy, env, seed, deterministic=True, rng=None):
    """Run one episode. Returns ``(total_true_reward, trace, observations)``."""
    obs = env.reset(seed)
    trace = [env.trace_point()]
    observations = [obs]
    total = 0.0
    done = False
    while not done:
        if deterministic:
            action = policy.forward(obs)
        else:
            action = policy.forward(obs) + policy.std * rng.standard_normal(policy.act_dim)
        step = env.step(action)
        total += step.reward
        obs, done = step.observation, step.done
        trace.append(env.trace_point())
        observations.append(obs)
    return total, np.array(trace), np.array(observations)


def expert_trace(env, obs, actions, seed):
    """Replay recorded expert actions from ``seed``; fails if the replay diverges."""
    o = env.reset(seed)
    if not np.array_equal(o, obs[0]):
        raise ConfigurationError(f"demo episode does not start from the state of seed {seed}")
    trace = [env.trace_point()]
    for t, a in enumerate(actions):
        step = env.step(a)
        trace.append(env.trace_point())
        if t + 1 < obs.shape[0] and not np.array_equal(step.observation, obs[t + 1]):
            raise ConfigurationError(f"replay of seed {seed} diverged at step {t + 1}")
    return np.array(trace)


def eval_frechet(policy, env, expert_demos, n_episodes=None, seed=None):
    """Mean Frechet distance between the policy's and the expert's paths on the same seeds.

    ``expert_demos`` must be the evaluation set: its episode seeds define the
    scenarios. ``seed``, if given, must match the set's base seed.
    """
    if seed is not None and int(seed) != expert_demos.base_seed:
        raise ConfigurationError(f"demos were recorded from seed {expert_demos.base_seed}, not {seed}")
    if expert_demos.env_name != env.name:
        raise ConfigurationError(f"demos are from {expert_demos.env_name!r}, env is {env.name!r}")
    n = len(expert_demos) if n_episodes is None else int(n_episodes)
    if n > len(expert_demos):
        raise ConfigurationError("asked for more episodes than the demo set holds")
    dists = []
    for (obs, act), s in list(zip(expert_demos.episodes, expert_demos.seeds))[:n]:
        ref = expert_trace(env, obs, act, s)
        _, trace, _ = rollout(policy, env, s)
        dists.append(frechet_distance(trace, ref))
    return float(np.mean(dists))


def gaussian_smooth(series, sigma=2.0):
    """Gaussian filter, kernel radius ceil(4 sigma), reflect padding, same length out."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty series")
    radius = int(np.ceil(4.0 * sigma))
    # scipy uses radius = int(truncate * sigma + 0.5); pick truncate to land on ceil(4 sigma)
    return gaussian_filter1d(series, sigma, mode="reflect", truncate=radius / sigma)


def write_metrics_csv(path, epochs, reward, frechet, mse, sigma=2.0):
    cols = {
        "reward": np.asarray(reward, dtype=np.float64),
        "frechet": np.asarray(frechet, dtype=np.float64),
        "mse": np.asarray(mse, dtype=np.float64),
    }
    smooth = {k: gaussian_smooth(v, sigma) for k, v in cols.items()}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for i, ep in enumerate(epochs):
            row = [int(ep)]
            for k in ("reward", "frechet", "mse"):
                row += [repr(float(cols[k][i])), repr(float(smooth[k][i]))]
            w.writerow(row)


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0].keys()) != METRICS_COLUMNS:
        raise ValueError(f"unexpected metrics columns in {path}")
    return {c: np.array([float(r[c]) for r in rows]) for c in METRICS_COLUMNS}
