"""File renderers for simulation results.

``write_report`` drops a machine-readable summary, a delimited per-trial
table, and rendered figures side by side in one directory.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .simlab import SimSummary


def write_report(summary: SimSummary, out_dir: str | Path) -> list[Path]:
    """Write summary.json, trials.csv and PNG figures under ``out_dir``.

    Returns the paths written.  Scores in the CSV stay exact (rational
    strings); the figures and the JSON aggregates use floats.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )
    written.append(summary_path)

    audit_names = sorted(
        {name for record in summary.records for name in record.audits}
    )
    trials_path = out / "trials.csv"
    with trials_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["trial", "policy", "score", "offline", "ratio"]
            + [f"audit_{name}" for name in audit_names]
        )
        for record in summary.records:
            writer.writerow(
                [
                    record.trial,
                    record.policy,
                    str(record.score),
                    str(record.offline),
                    f"{record.ratio:.6f}",
                ]
                + [int(record.audits[name]) for name in audit_names]
            )
    written.append(trials_path)

    written.append(_ratio_histogram(summary, out / "ratios.png"))
    written.append(_mean_bars(summary, out / "means.png"))
    return written


def _ratio_histogram(summary: SimSummary, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for policy in summary.policies:
        ratios = [
            r.ratio for r in summary.records if r.policy == policy.policy
        ]
        ax.hist(ratios, bins=20, range=(0.0, 1.0), alpha=0.5, label=policy.policy)
    ax.set_xlabel("score / offline optimum")
    ax.set_ylabel("trials")
    ax.set_title(
        f"m={summary.m} n={summary.n} k={summary.k} f={summary.f} "
        f"({summary.trials} trials)"
    )
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _mean_bars(summary: SimSummary, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    names = [p.policy for p in summary.policies]
    means = [p.mean for p in summary.policies]
    errors = [p.stderr for p in summary.policies]
    ax.bar(names, means, yerr=errors, capsize=4, color="#4878a8")
    ax.axhline(
        summary.offline_mean, color="#a84848", linestyle="--", label="offline mean"
    )
    ax.set_ylabel("mean score")
    ax.set_title(f"mean score over {summary.trials} trials")
    ax.legend()
    ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
