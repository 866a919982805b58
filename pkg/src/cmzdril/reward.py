"""Training-reward shapers driven by ensemble disagreement ``u``.

``cmz``      r = -alpha * (u - u_bar), then u_bar <- gamma * u_bar + (1 - gamma) * u
``dril``     +1 if u <= threshold else -1
``penalty``  r = -alpha * u
``true_env`` the environment's own reward
``zero``     0
"""

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .imitation import ensemble_std


class ShaperMode(str, Enum):
    CMZ = "cmz"
    DRIL = "dril"
    PENALTY = "penalty"
    TRUE_ENV = "true_env"
    ZERO = "zero"


@dataclass(frozen=True)
class ShaperState:
    mode: ShaperMode = ShaperMode.CMZ
    alpha: float = 10.0
    gamma: float = 0.99
    u_bar: float = 0.0
    dril_threshold: float = None
    u_bar0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", ShaperMode(self.mode))
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be > 0")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if self.u_bar < 0:
            raise ConfigurationError("u_bar must be >= 0")

    def reset(self):
        """Start-of-episode state: the running average goes back to ``u_bar0``."""
        return dataclasses.replace(self, u_bar=self.u_bar0)


@dataclass(frozen=True)
class ShaperConfig:
    mode: str = "cmz"
    alpha: float = 10.0
    gamma: float = 0.99
    u_bar0: float = 0.0
    dril_quantile: float = 0.98
    dril_threshold: float = None
    reset_per_episode: bool = True

    def initial_state(self, threshold=None):
        threshold = self.dril_threshold if threshold is None else threshold
        return ShaperState(ShaperMode(self.mode), self.alpha, self.gamma, self.u_bar0, threshold, self.u_bar0)


def _check_u(u):
    if not u >= 0.0:
        raise ValueError(f"disagreement must be non-negative, got {u}")


def cmz_reward(state, u):
    """Continuous mean-zero reward. Uses the current average, then updates it.

    Returns ``(reward, new_state)``.
    """
    _check_u(u)
    r = -state.alpha * (u - state.u_bar)
    u_bar = state.gamma * state.u_bar + (1.0 - state.gamma) * u
    return r, dataclasses.replace(state, u_bar=u_bar)


def dril_reward(state, u):
    if state.dril_threshold is None:
        raise ConfigurationError("DRIL reward needs a threshold; calibrate one first")
    return 1.0 if u <= state.dril_threshold else -1.0


def penalty_reward(state, u):
    _check_u(u)
    return -state.alpha * u


def shape(state, env_step, u):
    """Training reward for one transition. Returns ``(reward, new_state)``."""
    mode = state.mode
    if mode is ShaperMode.CMZ:
        return cmz_reward(state, u)
    if mode is ShaperMode.DRIL:
        return dril_reward(state, u), state
    if mode is ShaperMode.PENALTY:
        return penalty_reward(state, u), state
    if mode is ShaperMode.TRUE_ENV:
        return float(env_step.reward), state
    if mode is ShaperMode.ZERO:
        return 0.0, state
    raise ConfigurationError(f"unknown shaper mode {mode!r}")


def calibrate_dril_threshold(ensemble, demos, q=0.98):
    """Linear-interpolated ``q``-quantile of the disagreement over all expert observations."""
    if not 0.0 < q <= 1.0:
        raise ConfigurationError("q must lie in (0, 1]")
    obs = demos.observations()
    if obs.shape[0] == 0:
        raise ValueError("cannot calibrate on an empty demo set")
    return float(np.quantile(ensemble_std(ensemble, obs), q))
