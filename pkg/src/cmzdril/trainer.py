"""End-to-end training runs: BC baseline, disagreement-shaped PPO + NLL, and trial suites."""

import dataclasses
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .envs import collect_demos, load_demos, make_env, save_demos
from .errors import ConfigurationError, NonFiniteError
from .imitation import bc_train, ensemble_std, save_ensemble, train_ensemble
from .metrics import action_mse, expert_trace, frechet_distance, rollout, write_metrics_csv
from .nn import Adam, GaussianPolicy, ValueNet, save_policy, save_value
from .ppo import PpoConfig, collect_rollouts, ppo_update
from .reward import ShaperConfig, ShaperMode, calibrate_dril_threshold

CONDITIONS = ("bc", "cmz", "dril", "penalty", "zero", "true_env")


def derive_seed(master, trial, role):
    """Pure function of (master seed, trial index, role name)."""
    key = (int(trial), zlib.crc32(role.encode()))
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class BcConfig:
    epochs: int = 2000
    lr: float = 3e-4
    batch_size: int = 64
    full_batch_below: int = 512
    hidden: tuple = (64, 64)


@dataclass(frozen=True)
class TrainRunConfig:
    env: str = "waypoint"
    env_kwargs: dict = field(default_factory=dict)
    demo_episodes: int = 5
    ensemble_size: int = 5
    shaper: ShaperConfig = ShaperConfig()
    ppo: PpoConfig = PpoConfig()
    bc: BcConfig = BcConfig()
    nll_epochs: int = 1
    nll_lr_factor: float = 0.1
    total_updates: int = 150
    eval_episodes: int = 5
    eval_interval: int = 1
    master_seed: int = 0
    trial: int = 0
    pretrain: bool = True
    critic_warmup: int = 0  # rollouts spent fitting only the value net before the first cycle

    def __post_init__(self):
        if self.critic_warmup < 0:
            raise ConfigurationError("critic_warmup must be >= 0")
        if self.total_updates < 1:
            raise ConfigurationError("total_updates must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigurationError("eval_episodes must be >= 1")
        if self.eval_interval < 1:
            raise ConfigurationError("eval_interval must be >= 1")
        if self.demo_episodes < 1:
            raise ConfigurationError("demo_episodes must be >= 1")
        if self.pretrain and self.ensemble_size < 2:
            raise ConfigurationError("ensemble_size must be >= 2")

    def seed(self, role):
        return derive_seed(self.master_seed, self.trial, role)

    def env_factory(self):
        name, kwargs = self.env, dict(self.env_kwargs)
        return lambda: make_env(name, **kwargs)

    def with_mode(self, mode):
        return dataclasses.replace(self, shaper=dataclasses.replace(self.shaper, mode=ShaperMode(mode).value))

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class TrainRecord:
    condition: str
    eval_rows: list = field(default_factory=list)  # one dict per eval checkpoint
    update_rows: list = field(default_factory=list)  # one dict per PPO update
    loss_log: list = field(default_factory=list)  # ("ppo" | "nll", loss) in execution order
    status: str = "ok"
    policy: object = None
    value_net: object = None
    ensemble: object = None
    dril_threshold: float = None

    def series(self, key):
        return np.array([row[key] for row in self.eval_rows], dtype=np.float64)

    def final_window(self, key="reward"):
        """Mean of ``key`` over the final score window (see ``final_window_size``)."""
        values = self.series(key)
        return float(values[-final_window_size(len(values)) :].mean())

    def summary(self):
        return {
            "condition": self.condition,
            "status": self.status,
            "checkpoints": len(self.eval_rows),
            "window": final_window_size(len(self.eval_rows)),
            "reward": self.final_window("reward"),
            "frechet": self.final_window("frechet"),
            "mse": self.final_window("mse"),
        }


def final_window_size(n_checkpoints, full=100):
    """Last 100 checkpoints; with fewer than 100, the last 25% (at least one)."""
    if n_checkpoints >= full:
        return full
    return max(1, math.ceil(0.25 * n_checkpoints))


def eval_schedule(total_updates, interval):
    return [k for k in range(1, total_updates + 1) if k % interval == 0 or k == total_updates]


class Evaluator:
    """Deterministic evaluation on the held-out expert episodes' seeds.

    Expert reference paths are replayed once and cached. Nothing here touches
    training state.
    """

    def __init__(self, env, eval_demos):
        self.env = env
        self.demos = eval_demos
        self.seeds = list(eval_demos.seeds)
        self.ref_traces = [expert_trace(env, obs, act, s) for (obs, act), s in zip(eval_demos.episodes, self.seeds)]

    def __call__(self, policy):
        returns, dists = [], []
        for s, ref in zip(self.seeds, self.ref_traces):
            total, trace, _ = rollout(policy, self.env, s)
            returns.append(total)
            dists.append(frechet_distance(trace, ref))
        row = {
            "reward": float(np.mean(returns)),
            "frechet": float(np.mean(dists)),
            "mse": action_mse(policy, self.demos),
        }
        for k, v in row.items():
            if not np.isfinite(v):
                raise NonFiniteError(f"non-finite eval metric {k}")
        return row


def prepare_data(config):
    """Training and evaluation demo sets for this trial (same for every condition)."""
    env = config.env_factory()()
    demos = collect_demos(env, config.demo_episodes, config.seed("demos"))
    eval_demos = collect_demos(env, config.eval_episodes, config.seed("eval"))
    return demos, eval_demos


def pretrain_policy(config, demos):
    bc = config.bc
    policy = GaussianPolicy(demos.obs_dim, demos.act_dim, hidden=bc.hidden, seed=config.seed("policy"))
    _, losses = bc_train(
        policy,
        demos,
        epochs=bc.epochs,
        batch_size=bc.batch_size,
        lr=bc.lr,
        seed=config.seed("bc"),
        full_batch_below=bc.full_batch_below,
    )
    return policy, losses


def run_baseline_bc(config, demos=None, eval_demos=None):
    """Behavioral cloning only, scored on the same schedule as the RL runs."""
    if demos is None or eval_demos is None:
        demos, eval_demos = prepare_data(config)
    env = config.env_factory()()
    policy, losses = pretrain_policy(config, demos)
    record = TrainRecord("bc", policy=policy)
    record.loss_log.append(("bc", float(losses[-1])))
    row = Evaluator(env, eval_demos)(policy)
    # the policy is frozen, so every checkpoint scores the same
    for k in eval_schedule(config.total_updates, config.eval_interval):
        record.eval_rows.append({"update": k, **row})
    return record


def run_cmz_dril(config, demos=None, eval_demos=None, progress=None):
    """Pretrain by NLL, fit the ensemble, then alternate PPO updates with NLL passes.

    The shaper mode in ``config.shaper`` selects the training reward (CMZ,
    DRIL, penalty, true env reward or zero). With ``config.pretrain=False``
    the policy starts from scratch and no demos or ensemble are used (plain
    PPO; only valid with the true env or zero reward).
    """
    mode = ShaperMode(config.shaper.mode)
    env_factory = config.env_factory()
    env = env_factory()
    ppo_cfg = config.ppo
    record = TrainRecord(mode.value)

    if config.pretrain:
        if demos is None or eval_demos is None:
            demos, eval_demos = prepare_data(config)
        policy, losses = pretrain_policy(config, demos)
        record.loss_log.append(("bc", float(losses[-1])))
        bc = config.bc
        ensemble = train_ensemble(
            demos,
            K=config.ensemble_size,
            seed=config.seed("ensemble"),
            hidden=bc.hidden,
            epochs=bc.epochs,
            lr=bc.lr,
            batch_size=bc.batch_size,
            full_batch_below=bc.full_batch_below,
        )
        evaluator = Evaluator(env, eval_demos)
    else:
        if mode not in (ShaperMode.TRUE_ENV, ShaperMode.ZERO):
            raise ConfigurationError("runs without pretraining only support true_env or zero rewards")
        policy = GaussianPolicy(env.obs_dim, env.act_dim, hidden=config.bc.hidden, seed=config.seed("policy"))
        ensemble = None
        if eval_demos is None:
            eval_demos = collect_demos(env, config.eval_episodes, config.seed("eval"))
        evaluator = Evaluator(env, eval_demos)

    threshold = None
    if mode is ShaperMode.DRIL:
        threshold = config.shaper.dril_threshold
        if threshold is None:
            threshold = calibrate_dril_threshold(ensemble, demos, config.shaper.dril_quantile)
    shaper_state = config.shaper.initial_state(threshold)

    value_net = ValueNet(env.obs_dim, hidden=config.bc.hidden, seed=config.seed("value"))
    policy_opt = Adam(policy.parameters(), lr=ppo_cfg.policy_lr)
    value_opt = Adam(value_net.parameters(), lr=ppo_cfg.value_lr)
    nll_lr = config.bc.lr * config.nll_lr_factor
    nll_opt = Adam(policy.parameters(), lr=nll_lr)
    ppo_rng = np.random.default_rng(config.seed("ppo"))
    persistent_states = None if config.shaper.reset_per_episode else [shaper_state] * ppo_cfg.rollout_envs
    schedule = set(eval_schedule(config.total_updates, config.eval_interval))

    record.policy, record.value_net, record.ensemble, record.dril_threshold = policy, value_net, ensemble, threshold

    def rollouts(k, role):
        return collect_rollouts(
            env_factory,
            policy,
            value_net,
            shaper_state,
            ensemble,
            ppo_cfg.rollout_steps,
            derive_seed(config.seed("rollout"), k, role),
            n_envs=ppo_cfg.rollout_envs,
            shaper_states=persistent_states,
            reset_per_episode=config.shaper.reset_per_episode,
        )

    try:
        for k in range(1, config.critic_warmup + 1):
            diag = ppo_update(policy, value_net, rollouts(k, "warmup"), ppo_cfg, ppo_rng, policy_opt, value_opt, update_policy=False)
            record.loss_log.append(("critic", diag.value_loss))
        for k in range(1, config.total_updates + 1):
            trajs = rollouts(k, "collect")
            diag = ppo_update(policy, value_net, trajs, ppo_cfg, ppo_rng, policy_opt, value_opt)
            record.loss_log.append(("ppo", diag.policy_loss))
            nll = float("nan")
            if config.pretrain:
                _, nll_losses = bc_train(
                    policy,
                    demos,
                    epochs=config.nll_epochs,
                    batch_size=config.bc.batch_size,
                    lr=nll_lr,
                    seed=derive_seed(config.seed("nll"), k, "pass"),
                    full_batch_below=config.bc.full_batch_below,
                    optimizer=nll_opt,
                )
                nll = float(nll_losses[-1])
                record.loss_log.append(("nll", nll))
            shaped = np.concatenate([t.shaped_rewards for t in trajs])
            true = np.concatenate([t.true_rewards for t in trajs])
            u = np.concatenate([t.uncertainties for t in trajs])
            episodes = [t.true_rewards.sum() for t in trajs if t.dones[-1]]
            record.update_rows.append(
                {
                    "update": k,
                    "mean_shaped_reward": float(shaped.mean()),
                    "mean_true_reward": float(true.mean()),
                    "mean_episode_return": float(np.mean(episodes)) if episodes else float("nan"),
                    "mean_u": float(u.mean()),
                    "nll": nll,
                    **diag.as_dict(),
                }
            )
            if k in schedule:
                row = {"update": k, **evaluator(policy)}
                record.eval_rows.append(row)
                if progress is not None:
                    progress(k, row)
    except NonFiniteError as exc:
        record.status = f"aborted: {exc}"
    return record


def run_condition(config, condition, demos=None, eval_demos=None):
    if condition == "bc":
        return run_baseline_bc(config, demos, eval_demos)
    if condition not in CONDITIONS:
        raise ConfigurationError(f"unknown condition {condition!r}; choose from {CONDITIONS}")
    return run_cmz_dril(config.with_mode(condition), demos, eval_demos)


# --------------------------------------------------------------------------
# persistence


def write_run_dir(directory, config, condition, record, demos, eval_demos):
    from .harness.config import dump_config  # local import: harness depends on this module

    os.makedirs(directory, exist_ok=True)
    dump_config(config, os.path.join(directory, "config.yaml"), extra={"condition": condition})
    save_demos(demos, os.path.join(directory, "demos.bin"))
    save_demos(eval_demos, os.path.join(directory, "eval_demos.bin"))
    if record.policy is not None:
        save_policy(record.policy, os.path.join(directory, "policy.ckpt"))
    if record.value_net is not None:
        save_value(record.value_net, os.path.join(directory, "value.ckpt"))
    if record.ensemble is not None:
        save_ensemble(record.ensemble, os.path.join(directory, "ensemble"))
    epochs = [r["update"] for r in record.eval_rows]
    if epochs:
        write_metrics_csv(
            os.path.join(directory, "metrics.csv"),
            epochs,
            record.series("reward"),
            record.series("frechet"),
            record.series("mse"),
        )
    if record.update_rows:
        _write_rows(os.path.join(directory, "diagnostics.csv"), record.update_rows)
    payload = {
        "summary": record.summary(),
        "eval_rows": record.eval_rows,
        "update_rows": record.update_rows,
        "loss_log": record.loss_log,
        "dril_threshold": record.dril_threshold,
    }
    # written last: its presence marks the run as complete
    with open(os.path.join(directory, "record.json"), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def _write_rows(path, rows):
    import csv

    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in keys])


def load_record(directory):
    with open(os.path.join(directory, "record.json")) as fh:
        payload = json.load(fh)
    rec = TrainRecord(payload["summary"]["condition"], payload["eval_rows"], payload["update_rows"])
    rec.loss_log = [tuple(x) for x in payload["loss_log"]]
    rec.status = payload["summary"]["status"]
    rec.dril_threshold = payload["dril_threshold"]
    return rec


# --------------------------------------------------------------------------
# suites


def trial_config(base, trial):
    return dataclasses.replace(base, trial=int(trial))


def _suite_job(args):
    base, trial, condition, out_dir = args
    config = trial_config(base, trial)
    run_dir = os.path.join(out_dir, f"trial_{trial}", condition) if out_dir else None
    if run_dir and os.path.exists(os.path.join(run_dir, "record.json")):
        return trial, condition, load_record(run_dir)
    demos, eval_demos = prepare_data(config)
    record = run_condition(config, condition, demos, eval_demos)
    if run_dir:
        write_run_dir(run_dir, config, condition, record, demos, eval_demos)
    return trial, condition, record


def run_condition_suite(base_config, conditions, n_trials, out_dir=None, workers=1):
    """Run every condition for ``n_trials`` trials.

    Per trial, demo/eval/network seeds come from ``(master_seed, trial, role)``;
    all conditions in a trial share the demo and evaluation sets. Returns
    ``{condition: [TrainRecord per trial]}`` in trial order.
    """
    if n_trials < 1:
        raise ConfigurationError("n_trials must be >= 1")
    for c in conditions:
        if c not in CONDITIONS:
            raise ConfigurationError(f"unknown condition {c!r}; choose from {CONDITIONS}")
    jobs = [(base_config, t, c, out_dir) for t in range(n_trials) for c in conditions]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_suite_job, jobs))
    else:
        results = [_suite_job(j) for j in jobs]
    table = {c: [None] * n_trials for c in conditions}
    for trial, condition, record in results:
        table[condition][trial] = record
    return table


def random_policy_reward(env, seeds, seed=0):
    """Mean episode return of uniform random actions on the given reset seeds."""
    rng = np.random.default_rng(seed)
    totals = []
    for s in seeds:
        env.reset(s)
        total, done = 0.0, False
        while not done:
            step = env.step(env.random_action(rng))
            total += step.reward
            done = step.done
        totals.append(total)
    return float(np.mean(totals))


def uncertainty_descent(record, fraction=0.1):
    """Mean disagreement over visited states in the first and last ``fraction`` of updates."""
    u = np.array([r["mean_u"] for r in record.update_rows])
    n = max(1, int(round(fraction * len(u))))
    return float(u[:n].mean()), float(u[-n:].mean())
