from .base import Env, EnvStep
from .demos import DemoSet, collect_demos, episode_seeds, load_demos, save_demos
from .pendulum import PendulumWorld
from .waypoint import WaypointWorld, wrap_angle

ENVS = {"waypoint": WaypointWorld, "pendulum": PendulumWorld}


def make_env(name, **kwargs):
    try:
        cls = ENVS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVS)}") from None
    return cls(**kwargs)


__all__ = [
    "ENVS",
    "DemoSet",
    "Env",
    "EnvStep",
    "PendulumWorld",
    "WaypointWorld",
    "collect_demos",
    "episode_seeds",
    "load_demos",
    "make_env",
    "save_demos",
    "wrap_angle",
]
