from dataclasses import dataclass, field

import numpy as np

from .. import blob
from ..errors import ShapeError


def episode_seeds(seed, n):
    """Per-episode reset seeds derived from one base seed."""
    ss = np.random.SeedSequence(int(seed))
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in ss.spawn(n)]


@dataclass
class DemoSet:
    """Expert (observation, action) pairs grouped by episode."""

    env_name: str
    obs_dim: int
    act_dim: int
    episodes: list = field(default_factory=list)  # [(obs (T, obs_dim), act (T, act_dim))]
    seeds: list = field(default_factory=list)  # reset seed of each episode
    base_seed: int = 0

    def __post_init__(self):
        for obs, act in self.episodes:
            if obs.ndim != 2 or act.ndim != 2 or obs.shape[0] != act.shape[0] or obs.shape[0] < 1:
                raise ShapeError("each episode needs matching obs/action rows (at least one)")
            if obs.shape[1] != self.obs_dim or act.shape[1] != self.act_dim:
                raise ShapeError("episode dims disagree with the demo set")

    def __len__(self):
        return len(self.episodes)

    @property
    def n_pairs(self):
        return sum(obs.shape[0] for obs, _ in self.episodes)

    def observations(self):
        if not self.episodes:
            return np.zeros((0, self.obs_dim))
        return np.concatenate([obs for obs, _ in self.episodes])

    def actions(self):
        if not self.episodes:
            return np.zeros((0, self.act_dim))
        return np.concatenate([act for _, act in self.episodes])

    def subset(self, indices):
        """Episodes at ``indices`` (repeats allowed), keeping their seeds."""
        return DemoSet(
            self.env_name,
            self.obs_dim,
            self.act_dim,
            [self.episodes[i] for i in indices],
            [self.seeds[i] for i in indices] if self.seeds else [],
            self.base_seed,
        )


def collect_demos(env, n_episodes, seed, expert=None):
    """Roll out the expert for ``n_episodes`` and record (obs, action) pairs.

    ``expert`` defaults to ``env.expert_action``; pass any callable of
    ``(env, obs)`` to record a different controller.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    seeds = episode_seeds(seed, n_episodes)
    episodes = []
    for s in seeds:
        obs = env.reset(s)
        obs_rows, act_rows = [], []
        done = False
        while not done:
            act = env.expert_action() if expert is None else np.asarray(expert(env, obs), dtype=np.float64)
            act = np.clip(act, -1.0, 1.0)
            obs_rows.append(obs)
            act_rows.append(act)
            step = env.step(act)
            obs, done = step.observation, step.done
        episodes.append((np.array(obs_rows), np.array(act_rows)))
    return DemoSet(env.name, env.obs_dim, env.act_dim, episodes, seeds, int(seed))


def save_demos(demos, path):
    header = {
        "env": demos.env_name,
        "obs_dim": demos.obs_dim,
        "act_dim": demos.act_dim,
        "episodes": len(demos.episodes),
        "seeds": list(demos.seeds),
        "base_seed": demos.base_seed,
    }
    arrays = []
    for obs, act in demos.episodes:
        arrays += [obs, act]
    blob.write(path, "demos", header, arrays)


def load_demos(path):
    header, arrays = blob.read(path, "demos")
    if len(arrays) != 2 * header["episodes"]:
        raise blob.FormatError("episode count does not match payload")
    episodes = [(arrays[2 * i], arrays[2 * i + 1]) for i in range(header["episodes"])]
    return DemoSet(
        header["env"], header["obs_dim"], header["act_dim"], episodes, list(header["seeds"]), header["base_seed"]
    )
