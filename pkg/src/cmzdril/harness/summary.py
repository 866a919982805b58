"""Cross-trial summary tables: "mean (std)" of final-window scores per condition."""

import csv
import os

import numpy as np

from ..trainer import final_window_size

LABELS = {
    "bc": "Behavioral Cloning",
    "cmz": "CMZ-DRIL",
    "dril": "DRIL Reward",
    "penalty": "Penalty Reward",
    "zero": "No Reward",
    "true_env": "True Env Reward",
}
METRICS = ("reward", "frechet", "mse")
CSV_COLUMNS = ["condition", "label", "trials", "window"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]


def window_mean(record, key, window=None):
    values = record.series(key)
    n = final_window_size(len(values)) if window is None else min(int(window), len(values))
    return float(values[-n:].mean())


def mean_std(values):
    """Mean and sample std (ddof=1); std is 0 for a single value."""
    values = np.asarray(values, dtype=np.float64)
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std


def fmt(mean, std, digits=2):
    return f"{mean:.{digits}f} ({std:.{digits}f})"


def summarize(records, window=None):
    """``records`` maps condition -> list of TrainRecords (one per trial).

    Returns one dict per condition, in input order.
    """
    rows = []
    for condition, recs in records.items():
        if not recs:
            raise ValueError(f"no records for condition {condition!r}")
        row = {
            "condition": condition,
            "label": LABELS.get(condition, condition),
            "trials": len(recs),
            "window": final_window_size(len(recs[0].eval_rows)) if window is None else int(window),
        }
        for m in METRICS:
            row[f"{m}_mean"], row[f"{m}_std"] = mean_std([window_mean(r, m, window) for r in recs])
        rows.append(row)
    return rows


def write_summary_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r[c] if not isinstance(r[c], float) else f"{r[c]:.6f}" for c in CSV_COLUMNS])


def render_markdown(rows, env):
    """Conditions as rows, the environment as the column, one cell per metric."""
    lines = [
        f"Mean final-window reward (and standard deviation) over trials; window = last {rows[0]['window']} checkpoints.",
        "",
        f"| Method | {env} | Frechet | MSE |",
        "|---|---|---|---|",
    ]
    for r in rows:
        cells = [fmt(r[f"{m}_mean"], r[f"{m}_std"], 3 if m == "mse" else 2) for m in METRICS]
        lines.append(f"| {r['label']} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_summary(records, out_dir, env, window=None):
    """Write ``summary.csv`` and ``summary.md`` into ``out_dir``; returns the rows."""
    rows = summarize(records, window)
    write_summary_csv(rows, os.path.join(out_dir, "summary.csv"))
    with open(os.path.join(out_dir, "summary.md"), "w") as fh:
        fh.write(render_markdown(rows, env))
    return rows
