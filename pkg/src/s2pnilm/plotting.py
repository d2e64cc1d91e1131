"""Matplotlib figures written next to the CLI's delimited outputs.

Every function renders to a file and closes its figure; nothing is shown
interactively.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# PNG metadata would otherwise embed the matplotlib version string
PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=110, metadata=PNG_META)
    plt.close(fig)
    return path


def plot_training(report, path, title: str = "") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.2), constrained_layout=True)
        epochs = np.arange(1, len(report.train_loss) + 1)
        ax.plot(epochs, report.train_loss, "o-", label="train")
        ax.plot(epochs, report.val_loss, "s-", label="validation")
        if report.best_epoch >= 0:
            ax.axvline(report.best_epoch + 1, color="0.6", ls="--", lw=0.8)
        ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss (standardised)")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_disaggregation(mains, truth, prediction, path, title: str = "", max_points: int = 14400) -> Path:
    """Mains, true appliance and prediction against hours since the series start."""
    n = min(len(mains.values), max_points)
    hours = np.arange(n) * mains.interval / 3600.0
    with plt.rc_context(RC):
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 4.5), sharex=True, constrained_layout=True)
        top.plot(hours, mains.values[:n], color="0.4", lw=0.6)
        top.set_ylabel("mains (W)")
        top.set_title(title)
        if truth is not None:
            bottom.plot(hours, truth.values[:n], color="k", lw=0.8, label="ground truth")
        bottom.plot(hours, prediction.values[:n], color="tab:orange", lw=0.8, label="prediction")
        bottom.set_ylabel("appliance (W)")
        bottom.set_xlabel("hours")
        bottom.legend(loc="upper right")
        return _save(fig, path)


def plot_feature_cases(cases: dict, path, title: str = "") -> Path:
    """One column per perturbation case: the mains window above its feature map."""
    labels = list(cases)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, len(labels), figsize=(2.2 * len(labels), 4), squeeze=False,
                                 gridspec_kw={"height_ratios": [1, 2]}, constrained_layout=True)
        for j, label in enumerate(labels):
            r = cases[label]
            axes[0, j].plot(r.mains, color="0.3", lw=0.8)
            axes[0, j].set_title(f"{label}\npred {r.prediction:.0f} W")
            axes[0, j].set_xticks([])
            axes[1, j].imshow(r.grid.grid, aspect="auto", cmap="viridis", interpolation="nearest")
            axes[1, j].set_xlabel("position")
            if j == 0:
                axes[0, j].set_ylabel("mains (W)")
                axes[1, j].set_ylabel("filter")
            else:
                axes[1, j].set_yticks([])
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_comparison(rows: list[dict], path, title: str = "") -> Path:
    """Held-out midpoint MSE of both schemes, one pair of bars per seed."""
    seeds = [r["seed"] for r in rows]
    x = np.arange(len(rows))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(rows) + 2), 3.2), constrained_layout=True)
        ax.bar(x - 0.2, [r["point_mse"] for r in rows], 0.4, label="seq2point")
        ax.bar(x + 0.2, [r["seq_mse"] for r in rows], 0.4, label="seq2seq (midpoint)")
        ax.set_xticks(x, [str(s) for s in seeds])
        ax.set_xlabel("seed")
        ax.set_ylabel("midpoint MSE (standardised)")
        ax.set_yscale("log")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)
