"""Behavioral cloning and the bagged ensemble used to measure disagreement."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .nn import Adam, GaussianPolicy, gaussian_nll, load_policy, save_policy
from .errors import ShapeError


def child_seeds(seed, n):
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def bc_train(
    policy,
    demos,
    epochs=2000,
    batch_size=64,
    lr=3e-4,
    seed=0,
    full_batch_below=512,
    optimizer=None,
):
    """Fit ``policy`` to the demo pairs by minimizing the Gaussian NLL.

    Uses a single full batch when there are fewer than ``full_batch_below``
    pairs, otherwise shuffled minibatches. Pass an existing ``optimizer`` to
    keep Adam moments across calls. Returns ``(policy, per_epoch_mean_loss)``.
    """
    obs = demos.observations()
    act = demos.actions()
    n = obs.shape[0]
    if n == 0:
        raise ValueError("cannot behavior-clone from an empty demo set")
    if obs.shape[1] != policy.obs_dim or act.shape[1] != policy.act_dim:
        raise ShapeError("demo dims do not match the policy")
    if optimizer is None:
        optimizer = Adam(policy.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    bs = n if n < full_batch_below else int(batch_size)
    losses = np.empty(epochs)
    for epoch in range(epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            policy.zero_grad()
            loss = gaussian_nll(policy, obs[idx], act[idx])
            optimizer.step(lr)
            policy.clamp_log_std()
            total += loss * idx.shape[0]
        losses[epoch] = total / n
    return policy, losses


@dataclass
class Ensemble:
    members: list
    seeds: list = field(default_factory=list)
    resample_indices: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least 2 members")
        dims = {(m.obs_dim, m.act_dim) for m in self.members}
        if len(dims) != 1:
            raise ShapeError("ensemble members disagree on dimensions")

    @property
    def K(self):
        return len(self.members)

    @property
    def obs_dim(self):
        return self.members[0].obs_dim

    @property
    def act_dim(self):
        return self.members[0].act_dim

    def member_means(self, obs):
        """Stacked member means, shape (K, B, act_dim)."""
        return np.stack([m.mean(obs) for m in self.members])


def train_ensemble(demos, K=5, seed=0, hidden=(64, 64), epochs=2000, lr=3e-4, batch_size=64, full_batch_below=512):
    """Train ``K`` policies, each on an episode-level bootstrap resample of ``demos``."""
    if K < 2:
        raise ValueError("K must be >= 2")
    if len(demos) == 0:
        raise ValueError("cannot train an ensemble on an empty demo set")
    members, seeds, resamples = [], [], []
    for k, s in enumerate(child_seeds(seed, K)):
        rng = np.random.default_rng(s)
        idx = rng.integers(0, len(demos), size=len(demos)).tolist()
        init_seed, train_seed = child_seeds(s, 2)
        policy = GaussianPolicy(demos.obs_dim, demos.act_dim, hidden=hidden, seed=init_seed)
        bc_train(
            policy,
            demos.subset(idx),
            epochs=epochs,
            batch_size=batch_size,
            lr=lr,
            seed=train_seed,
            full_batch_below=full_batch_below,
        )
        members.append(policy)
        seeds.append(s)
        resamples.append(idx)
    return Ensemble(members, seeds, resamples)


def ensemble_std(ensemble, obs):
    """Disagreement ``u``: per-dimension population std of member means, averaged over dimensions.

    Returns a float for a single observation, an array of shape (B,) for a batch.
    """
    obs = np.asarray(obs, dtype=np.float64)
    single = obs.ndim == 1
    means = ensemble.member_means(obs)  # (K, B, A)
    # shifting by one member leaves the std unchanged and makes identical members give exactly 0
    u = (means - means[:1]).std(axis=0).mean(axis=1)
    return float(u[0]) if single else u


def save_ensemble(ensemble, directory):
    os.makedirs(directory, exist_ok=True)
    files = []
    for k, member in enumerate(ensemble.members):
        name = f"member_{k}.ckpt"
        save_policy(member, os.path.join(directory, name))
        files.append(name)
    manifest = {"K": ensemble.K, "seeds": ensemble.seeds, "resample_indices": ensemble.resample_indices, "files": files}
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_ensemble(directory):
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    members = [load_policy(os.path.join(directory, f)) for f in manifest["files"]]
    return Ensemble(members, manifest["seeds"], manifest["resample_indices"])
