"""Experiment configuration: YAML file < environment variables < CLI flags.

Environment overrides use the ``CMZDRIL_CFG_`` prefix; nested keys use a
double underscore, e.g. ``CMZDRIL_CFG_PPO__CLIP=0.1`` or
``CMZDRIL_CFG_TOTAL_UPDATES=20``. Values are parsed as YAML scalars.
"""

import dataclasses
import os
from dataclasses import dataclass, field

import yaml

from ..errors import ConfigurationError
from ..ppo import PpoConfig
from ..reward import ShaperConfig
from ..trainer import CONDITIONS, BcConfig, TrainRunConfig

ENV_PREFIX = "CMZDRIL_CFG_"
SECTIONS = {"shaper": ShaperConfig, "ppo": PpoConfig, "bc": BcConfig}


@dataclass(frozen=True)
class ExperimentConfig:
    run: TrainRunConfig = TrainRunConfig()
    out: str = "runs"
    conditions: tuple = ("bc", "cmz")
    trials: int = 5
    workers: int = 1
    plots: bool = True

    def __post_init__(self):
        for c in self.conditions:
            if c not in CONDITIONS:
                raise ConfigurationError(f"unknown condition {c!r}; choose from {', '.join(CONDITIONS)}")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


_TOP_LEVEL = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"run"}
_RUN_KEYS = {f.name for f in dataclasses.fields(TrainRunConfig)}
_ALIASES = {"seed": "master_seed"}


def _build(cls, values, where):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in values:
            v = values[f.name]
            if f.name == "hidden" or (f.name == "conditions" and v is not None):
                v = tuple(v) if not isinstance(v, str) else tuple(s.strip() for s in v.split(",") if s.strip())
            kwargs[f.name] = v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def from_mapping(data):
    """Build an ExperimentConfig from a flat-ish mapping (YAML layout)."""
    data = dict(data or {})
    for alias, real in _ALIASES.items():
        if alias in data:
            data[real] = data.pop(alias)
    top = {k: data.pop(k) for k in list(data) if k in _TOP_LEVEL}
    sections = {}
    for name, cls in SECTIONS.items():
        sec = data.pop(name, None) or {}
        if not isinstance(sec, dict):
            raise ConfigurationError(f"section {name!r} must be a mapping")
        sections[name] = _build(cls, sec, name)
    unknown = set(data) - _RUN_KEYS
    if unknown:
        raise ConfigurationError(f"unknown key(s): {', '.join(sorted(unknown))}")
    run = _build(TrainRunConfig, {**data, **sections}, "run config")
    return _build(ExperimentConfig, {**top, "run": run}, "experiment config")


def to_mapping(config):
    """Inverse of ``from_mapping`` (plain types only)."""
    if isinstance(config, TrainRunConfig):
        config = ExperimentConfig(run=config)
    run = dataclasses.asdict(config.run)
    run["seed"] = run.pop("master_seed")
    for name in SECTIONS:
        run[name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in run[name].items()}
    out = {k: getattr(config, k) for k in sorted(_TOP_LEVEL)}
    out["conditions"] = list(out["conditions"])
    return {**run, **out}


def _set_path(data, dotted, value):
    parts = dotted.split(".")
    cur = data
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
        if not isinstance(cur, dict):
            raise ConfigurationError(f"cannot set {dotted}: {p} is not a section")
    cur[parts[-1]] = value


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        dotted = key[len(ENV_PREFIX) :].lower().replace("__", ".")
        out[dotted] = yaml.safe_load(raw)
    return out


def load_config(path=None, overrides=None, environ=None):
    """Resolve the experiment config. ``overrides`` maps dotted keys to values."""
    data = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigurationError(f"{path} must contain a mapping")
        data = loaded or {}
    for dotted, value in env_overrides(environ).items():
        _set_path(data, dotted, value)
    for dotted, value in (overrides or {}).items():
        _set_path(data, dotted, value)
    return from_mapping(data)


def dump_config(config, path, extra=None):
    data = to_mapping(config)
    if extra:
        data = {**data, "_run": dict(extra)}
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True, default_flow_style=False)


def read_snapshot(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    data.pop("_run", None)
    return from_mapping(data)
