"""PPO with GAE and a separate value network."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, NonFiniteError
from .imitation import ensemble_std
from .kernels import gae_advantages
from .nn import HALF_LOG_2PI, clip_grad_norm, entropy
from .reward import ShaperMode, shape


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 10
    minibatch_size: int = 64
    policy_lr: float = 3e-4
    value_lr: float = 3e-4
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    rollout_steps: int = 2048
    rollout_envs: int = 8
    target_kl: float = None  # stop policy epochs once a minibatch KL exceeds 1.5x this


    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigurationError("gae_lambda must lie in [0, 1]")
        if not self.clip > 0:
            raise ConfigurationError("clip must be > 0")
        if self.epochs < 1 or self.minibatch_size < 1 or self.rollout_steps < 1 or self.rollout_envs < 1:
            raise ConfigurationError("epochs, minibatch_size, rollout_steps and rollout_envs must be >= 1")
        if self.target_kl is not None and not self.target_kl > 0:
            raise ConfigurationError("target_kl must be > 0 when set")


@dataclass
class Trajectory:
    """One episode, or the truncated tail of one, from a single environment."""

    obs: np.ndarray
    actions: np.ndarray
    shaped_rewards: np.ndarray
    true_rewards: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_obs: np.ndarray  # observation after the final step (bootstrap input)
    uncertainties: np.ndarray = field(default=None)

    def __len__(self):
        return self.obs.shape[0]


@dataclass
class PpoDiagnostics:
    policy_loss: float
    value_loss: float
    approx_kl: float
    clip_fraction: float
    entropy: float

    def as_dict(self):
        return asdict(self)


def compute_gae(traj, value_net, gamma, gae_lambda):
    """Return ``(advantages, returns)``; bootstraps from ``value_net`` unless the last step is terminal."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    bootstrap = 0.0 if traj.dones[-1] else float(value_net.predict(traj.last_obs))
    adv = gae_advantages(traj.shaped_rewards, traj.values, traj.dones, bootstrap, gamma, gae_lambda)
    return adv, adv + traj.values


def normalize_advantages(adv):
    adv = adv - adv.mean()
    std = adv.std()
    if std * std >= 1e-12:
        adv = adv / std
    return adv


def policy_surrogate(policy, obs, actions, old_log_probs, advantages, clip, entropy_coef=0.0, backward=True):
    """Negated clipped surrogate (minus entropy bonus). Returns ``(loss, ratio)``.

    With ``backward=True`` gradients are accumulated into the policy.
    """
    B = obs.shape[0]
    mu, cache = policy.mlp.forward(obs)
    log_std = policy.log_std.values
    inv_std = np.exp(-log_std)
    z = (actions - mu) * inv_std
    logp = -(log_std.sum() + policy.act_dim * HALF_LOG_2PI + 0.5 * (z * z).sum(axis=1))
    ratio = np.exp(logp - old_log_probs)
    s1 = ratio * advantages
    s2 = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    loss = -float(np.minimum(s1, s2).mean()) - entropy_coef * entropy(policy)
    if backward:
        g_logp = np.where(s1 <= s2, -advantages * ratio / B, 0.0)
        policy.mlp.backward(cache, g_logp[:, None] * z * inv_std)
        policy.log_std.grad += (g_logp[:, None] * (z * z - 1.0)).sum(axis=0) - entropy_coef
    return loss, ratio


def value_loss(value_net, obs, returns, coef=0.5, backward=True):
    """Mean squared error of the value head; the gradient is scaled by ``coef``."""
    v, cache = value_net.mlp.forward(obs)
    err = v[:, 0] - returns
    loss = float(np.mean(err * err))
    if backward:
        value_net.mlp.backward(cache, (2.0 * coef / obs.shape[0]) * err[:, None])
    return loss


def _finite(name, *values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"non-finite {name} during PPO update")


def ppo_update(policy, value_net, trajectories, config, rng, policy_opt, value_opt, update_policy=True):
    """Run ``config.epochs`` of shuffled minibatch PPO over the batch.

    With ``config.target_kl`` set, policy steps stop for the rest of the
    update once a minibatch's KL estimate passes ``1.5 * target_kl``; the
    value net keeps training. ``update_policy=False`` fits only the value net.
    """
    advs, rets = [], []
    for traj in trajectories:
        a, r = compute_gae(traj, value_net, config.gamma, config.gae_lambda)
        advs.append(a)
        rets.append(r)
    obs = np.concatenate([t.obs for t in trajectories])
    actions = np.concatenate([t.actions for t in trajectories])
    old_logp = np.concatenate([t.log_probs for t in trajectories])
    adv = normalize_advantages(np.concatenate(advs))
    returns = np.concatenate(rets)
    _finite("advantages", adv, returns)

    n = obs.shape[0]
    mb = min(config.minibatch_size, n)
    pol_losses, val_losses = [], []
    kl_limit = None if config.target_kl is None else 1.5 * config.target_kl
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = order[start : start + mb]
            if update_policy:
                policy.zero_grad()
                loss, ratio = policy_surrogate(
                    policy, obs[idx], actions[idx], old_logp[idx], adv[idx], config.clip, config.entropy_coef
                )
                _finite("ratio/loss", ratio, loss)
                pol_losses.append(loss)
                if kl_limit is not None and np.mean((ratio - 1.0) - np.log(ratio)) > kl_limit:
                    update_policy = False
                else:
                    clip_grad_norm(policy.parameters(), config.max_grad_norm)
                    policy_opt.step()
                    policy.clamp_log_std()

            value_net.zero_grad()
            vl = value_loss(value_net, obs[idx], returns[idx], config.value_coef)
            _finite("value loss", vl)
            clip_grad_norm(value_net.parameters(), config.max_grad_norm)
            value_opt.step()
            val_losses.append(vl)

    _, ratio = policy_surrogate(policy, obs, actions, old_logp, adv, config.clip, backward=False)
    _finite("ratio", ratio)
    log_ratio = np.log(ratio)
    return PpoDiagnostics(
        policy_loss=float(np.mean(pol_losses)) if pol_losses else 0.0,
        value_loss=float(np.mean(val_losses)),
        approx_kl=float(np.mean((ratio - 1.0) - log_ratio)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > config.clip)),
        entropy=entropy(policy),
    )


def _split(n, k):
    base, extra = divmod(n, k)
    return [base + (1 if j < extra else 0) for j in range(k)]


def collect_rollouts(
    env_factory,
    policy,
    value_net,
    shaper_state,
    ensemble,
    n_steps,
    seed,
    n_envs=8,
    shaper_states=None,
    reset_per_episode=True,
):
    """Step ``n_envs`` environments in lockstep with sampled actions.

    Exactly ``n_steps`` transitions are logged in total. Episodes that end
    mid-collection are reset with fresh seeds. The shaped reward of step i is
    ``shape(state, step, u)`` where ``u`` is the ensemble disagreement at the
    observation the action led to. With ``reset_per_episode=False`` the
    running average carries across episodes; pass a mutable ``shaper_states``
    list to carry it across calls too.
    """
    n_envs = max(1, min(n_envs, n_steps))
    quotas = _split(n_steps, n_envs)
    root = np.random.SeedSequence(int(seed))
    action_ss, *env_ss = root.spawn(1 + n_envs)
    rng = np.random.default_rng(action_ss)
    needs_u = shaper_state.mode in (ShaperMode.CMZ, ShaperMode.DRIL, ShaperMode.PENALTY)
    if needs_u and ensemble is None:
        raise ConfigurationError(f"shaper mode {shaper_state.mode.value} needs an ensemble")

    def next_seed(j):
        return int(env_ss[j].spawn(1)[0].generate_state(1, dtype=np.uint32)[0])

    envs = [env_factory() for _ in range(n_envs)]
    obs = [env.reset(next_seed(j)) for j, env in enumerate(envs)]
    if shaper_states is None:
        shaper_states = [shaper_state.reset() for _ in range(n_envs)]
    bufs = [_new_buf() for _ in range(n_envs)]
    trajectories = []

    for t in range(max(quotas)):
        active = [j for j in range(n_envs) if t < quotas[j]]
        ob = np.array([obs[j] for j in active])
        mu = policy.mean(ob)
        log_std = policy.log_std.values
        z = rng.standard_normal(mu.shape)
        act = mu + np.exp(log_std) * z
        logp = -(log_std.sum() + policy.act_dim * HALF_LOG_2PI + 0.5 * (z * z).sum(axis=1))
        vals = value_net.predict(ob)
        steps = [envs[j].step(act[i]) for i, j in enumerate(active)]
        next_ob = np.array([s.observation for s in steps])
        u = ensemble_std(ensemble, next_ob) if ensemble is not None else np.zeros(len(active))
        for i, j in enumerate(active):
            step = steps[i]
            r, shaper_states[j] = shape(shaper_states[j], step, float(u[i]))
            buf = bufs[j]
            buf["obs"].append(ob[i])
            buf["act"].append(act[i])
            buf["shaped"].append(r)
            buf["true"].append(step.reward)
            buf["logp"].append(logp[i])
            buf["val"].append(vals[i])
            buf["done"].append(step.done)
            buf["u"].append(u[i])
            last_step = t == quotas[j] - 1
            if step.done or last_step:
                trajectories.append(_finish(buf, step.observation))
                bufs[j] = _new_buf()
            if step.done:
                if not last_step:
                    obs[j] = envs[j].reset(next_seed(j))
                if reset_per_episode:
                    shaper_states[j] = shaper_states[j].reset()
            else:
                obs[j] = step.observation
    return trajectories


def _new_buf():
    return {k: [] for k in ("obs", "act", "shaped", "true", "logp", "val", "done", "u")}


def _finish(buf, last_obs):
    return Trajectory(
        obs=np.array(buf["obs"]),
        actions=np.array(buf["act"]),
        shaped_rewards=np.array(buf["shaped"], dtype=np.float64),
        true_rewards=np.array(buf["true"], dtype=np.float64),
        log_probs=np.array(buf["logp"], dtype=np.float64),
        values=np.array(buf["val"], dtype=np.float64),
        dones=np.array(buf["done"], dtype=np.float64),
        last_obs=np.array(last_obs),
        uncertainties=np.array(buf["u"], dtype=np.float64),
    )
