"""Figure rendering for evaluation and experiment reports.

Figures are written next to the delimited report output; rendering uses the
Agg backend so runs are headless and byte-reproducible.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulate import ARM_BASELINE, ExperimentReport

_ARM_STYLE = {
    ARM_BASELINE: {"color": "0.35", "marker": "s"},
    "rs": {"color": "tab:blue", "marker": "o"},
    "nn": {"color": "tab:red", "marker": "^"},
}


def plot_eer_by_k(report: ExperimentReport, path: str | Path) -> None:
    """Mean EER versus generation coefficient, one line per strategy."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    cells = report.cells()
    baseline = [(arm, k) for arm, k in cells if arm == ARM_BASELINE]
    base_point = None
    if baseline:
        k0 = baseline[0][1]
        base_point = (k0, report.mean_eer(ARM_BASELINE, k0))
        ax.axhline(base_point[1], linestyle="--", linewidth=1, color="0.35",
                   label=f"baseline (K={k0})")
    for arm in ("rs", "nn"):
        ks = sorted(k for a, k in cells if a == arm)
        if not ks:
            continue
        xs, ys = [], []
        if base_point is not None:
            xs.append(base_point[0])
            ys.append(base_point[1])
        xs.extend(ks)
        ys.extend(report.mean_eer(arm, k) for k in ks)
        style = _ARM_STYLE[arm]
        ax.plot(xs, ys, label=f"VCA-{arm.upper()}", linewidth=1.5, **style)
    ax.set_xlabel("generation coefficient K")
    ax.set_ylabel("mean EER")
    ax.set_title(f"{report.config.scenario.kind} scenario, {report.config.n_seeds} seeds")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_arm_means(report: ExperimentReport, path: str | Path) -> None:
    """Per-arm mean EER with across-seed standard deviation bars."""
    cells = report.cells()
    labels, means, stds, colors = [], [], [], []
    for arm, k in cells:
        runs = report.arm_runs(arm, k)
        labels.append(arm if arm == ARM_BASELINE else f"{arm} K={k}")
        eers = [r.eer for r in runs]
        means.append(np.mean(eers))
        stds.append(np.std(eers))
        colors.append(_ARM_STYLE.get(arm, {}).get("color", "0.6"))
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    xs = np.arange(len(labels))
    ax.bar(xs, means, yerr=stds, capsize=4, color=colors, alpha=0.85)
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("mean EER")
    ax.set_title(f"{report.config.scenario.kind} scenario, {report.config.n_seeds} seeds")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_score_distributions(
    scores: list[float], labels: list[int], threshold: float, path: str | Path
) -> None:
    """Target / nontarget score histograms with the EER threshold marked."""
    s = np.asarray(scores)
    y = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    bins = np.linspace(min(-1.0, s.min()), max(1.0, s.max()), 61)
    ax.hist(s[y == 1], bins=bins, alpha=0.6, label="target", color="tab:green")
    ax.hist(s[y == 0], bins=bins, alpha=0.6, label="nontarget", color="tab:orange")
    ax.axvline(threshold, color="k", linestyle="--", linewidth=1,
               label=f"EER threshold {threshold:.3f}")
    ax.set_xlabel("cosine score")
    ax.set_ylabel("trial count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
