"""Command-line entry point: ``cmzdril {demo-collect,train,suite,eval,plot}``."""

import argparse
import json
import os
import sys

import yaml

from ..envs import collect_demos, load_demos, make_env, save_demos
from ..errors import ConfigurationError
from ..metrics import read_metrics_csv
from ..nn import load_policy
from ..trainer import CONDITIONS, Evaluator, _suite_job, run_condition_suite
from .config import dump_config, load_config, read_snapshot
from .plotting import write_svg
from .summary import write_summary


def _add_common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--env", choices=["waypoint", "pendulum"])
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key, dotted for sections (e.g. ppo.clip=0.1)",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="cmzdril", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-collect", help="record expert demonstrations")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=5)

    p = sub.add_parser("train", help="run one condition for one trial")
    _add_common(p)
    p.add_argument("--condition", default="cmz", choices=CONDITIONS)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("suite", help="run conditions x trials and write the summary table")
    _add_common(p)
    p.add_argument("--conditions", help="comma-separated, e.g. bc,cmz,zero")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("eval", help="score a saved run directory's policy")
    p.add_argument("run_dir")
    p.add_argument("--episodes", type=int, help="evaluate on the first N held-out episodes")

    p = sub.add_parser("plot", help="render metrics CSVs to an SVG triptych")
    p.add_argument("inputs", nargs="+", help="metrics.csv files or run directories")
    p.add_argument("--out", required=True, help="SVG path")
    p.add_argument("--title")
    return parser


def _overrides(args):
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    for flag, key in (("env", "env"), ("seed", "seed"), ("out", "out"), ("trials", "trials"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    if getattr(args, "conditions", None):
        out["conditions"] = args.conditions
    if getattr(args, "no_plots", False):
        out["plots"] = False
    return out


def cmd_demo_collect(args):
    config = load_config(args.config, _overrides(args))
    run = config.run
    os.makedirs(config.out, exist_ok=True)
    env = make_env(run.env, **run.env_kwargs)
    demos = collect_demos(env, args.episodes, run.master_seed)
    path = os.path.join(config.out, "demos.bin")
    save_demos(demos, path)
    dump_config(config, os.path.join(config.out, "config.yaml"), extra={"command": "demo-collect", "episodes": args.episodes})
    print(f"wrote {demos.n_pairs} pairs from {len(demos)} episodes to {path}")
    return 0


def cmd_train(args):
    config = load_config(args.config, _overrides(args))
    _, _, record = _suite_job((config.run, args.trial, args.condition, config.out))
    run_dir = os.path.join(config.out, f"trial_{args.trial}", args.condition)
    s = record.summary()
    print(f"{args.condition} trial {args.trial}: reward {s['reward']:.2f} frechet {s['frechet']:.2f} mse {s['mse']:.4f} [{s['status']}]")
    print(f"run directory: {run_dir}")
    return 0 if record.status == "ok" else 1


def cmd_suite(args):
    config = load_config(args.config, _overrides(args))
    os.makedirs(config.out, exist_ok=True)
    dump_config(config, os.path.join(config.out, "config.yaml"), extra={"command": "suite"})
    table = run_condition_suite(config.run, list(config.conditions), config.trials, config.out, config.workers)
    rows = write_summary(table, config.out, config.run.env)
    if config.plots:
        plot_dir = os.path.join(config.out, "plots")
        os.makedirs(plot_dir, exist_ok=True)
        for trial in range(config.trials):
            curves = {}
            for cond in config.conditions:
                path = os.path.join(config.out, f"trial_{trial}", cond, "metrics.csv")
                if os.path.exists(path):
                    curves[cond] = read_metrics_csv(path)
            if curves:
                write_svg(curves, os.path.join(plot_dir, f"trial_{trial}.svg"), title=f"{config.run.env}, trial {trial}")
    with open(os.path.join(config.out, "summary.md")) as fh:
        sys.stdout.write(fh.read())
    aborted = [r for recs in table.values() for r in recs if r.status != "ok"]
    return 1 if aborted else 0


def cmd_eval(args):
    snapshot = read_snapshot(os.path.join(args.run_dir, "config.yaml"))
    run = snapshot.run
    env = make_env(run.env, **run.env_kwargs)
    eval_demos = load_demos(os.path.join(args.run_dir, "eval_demos.bin"))
    if args.episodes is not None:
        if not 1 <= args.episodes <= len(eval_demos):
            raise ConfigurationError(f"--episodes must lie in [1, {len(eval_demos)}]")
        eval_demos = eval_demos.subset(range(args.episodes))
    policy = load_policy(os.path.join(args.run_dir, "policy.ckpt"))
    row = Evaluator(env, eval_demos)(policy)
    print(json.dumps(row, sort_keys=True))
    return 0


def cmd_plot(args):
    curves = {}
    for item in args.inputs:
        path = os.path.join(item, "metrics.csv") if os.path.isdir(item) else item
        label = os.path.basename(os.path.dirname(os.path.abspath(path))) or path
        if label in curves:
            label = path
        curves[label] = read_metrics_csv(path)
    write_svg(curves, args.out, args.title)
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "demo-collect": cmd_demo_collect,
    "train": cmd_train,
    "suite": cmd_suite,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
