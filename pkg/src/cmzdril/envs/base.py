from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, ShapeError


@dataclass(frozen=True)
class EnvStep:
    observation: np.ndarray
    reward: float  # true environment reward
    done: bool
    info: dict = field(default_factory=dict)


class Env:
    """Common episode bookkeeping. Subclasses implement ``_reset``/``_step``."""

    name = "env"
    obs_dim = 0
    act_dim = 0

    def __init__(self, horizon):
        self.horizon = int(horizon)
        self.t = 0
        self.done = True
        self.seed = None

    def reset(self, seed):
        self.seed = int(seed)
        self.t = 0
        self.done = False
        return self._reset(np.random.default_rng(self.seed))

    def step(self, action):
        if self.done:
            raise ContractError("step() called on a finished episode; call reset() first")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.act_dim:
            raise ShapeError(f"{self.name} expects {self.act_dim} action dims, got {action.shape[0]}")
        action = np.clip(action, -1.0, 1.0)
        obs, reward, terminal = self._step(action)
        self.t += 1
        self.done = bool(terminal or self.t >= self.horizon)
        return EnvStep(obs, float(reward), self.done, {"step": self.t})

    def random_action(self, rng):
        return rng.uniform(-1.0, 1.0, self.act_dim)

    # subclass hooks
    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError

    def observe(self):
        raise NotImplementedError

    def expert_action(self):
        raise NotImplementedError

    def trace_point(self):
        """Point used for trajectory similarity (position, or phase for the pendulum)."""
        raise NotImplementedError
