"""Report figures (written to files; uses the non-interactive Agg backend)."""

from __future__ import annotations

from statistics import NormalDist
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_probit = np.vectorize(NormalDist().inv_cdf)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_roc(evals, path, title="ROC"):
    fig, ax = plt.subplots(figsize=(6, 5))
    for e in evals:
        ax.plot(e.roc.fpr, e.roc.tpr, lw=1, label=f"{e.name} ({e.auc:.3f})")
    ax.plot([0, 1], [0, 1], "k:", lw=0.8)
    ax.set(xlabel="false positive rate", ylabel="true positive rate", title=title)
    ax.legend(fontsize=7, ncol=2, loc="lower right")
    _save(fig, path)


def plot_det(evals, path, title="DET"):
    """FNR vs FPR on normal-deviate axes; rates are clipped to [0.1%, 99.9%]."""
    fig, ax = plt.subplots(figsize=(6, 5))
    lo, hi = 1e-3, 1 - 1e-3
    for e in evals:
        ax.plot(_probit(np.clip(e.det.fpr, lo, hi)), _probit(np.clip(e.det.fnr, lo, hi)), lw=1, label=e.name)
    ticks = np.array([0.001, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99])
    ax.set_xticks(_probit(ticks), [f"{t:g}" for t in ticks])
    ax.set_yticks(_probit(ticks), [f"{t:g}" for t in ticks])
    ax.set(xlabel="false positive rate", ylabel="false negative rate", title=title)
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def plot_training_curves(reports, path):
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for r in reports:
        a1.plot(r.steps, r.losses, lw=0.8, label=r.class_name)
        a2.plot(r.steps, r.test_accs, lw=0.8)
        for s in r.reencode_steps[1:]:
            a1.axvline(s, color="grey", lw=0.3)
    a1.set(ylabel="windowed loss", yscale="log")
    a2.set(xlabel="epoch", ylabel="test accuracy")
    a1.legend(fontsize=7, ncol=3)
    _save(fig, path)


def plot_pmd(matrix, path, n_bins: int = 40):
    """Histogram of every feature column."""
    from .features import pmd

    cols = matrix.columns
    n = len(cols)
    ncol = min(n, 4)
    nrow = int(np.ceil(n / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(3 * ncol, 2.2 * nrow), squeeze=False)
    for ax, j in zip(axes.flat, range(n)):
        h = pmd(matrix.values[:, j], n_bins)
        ax.stairs(h.masses, h.edges, fill=True)
        ax.set_title(cols[j], fontsize=8)
    for ax in list(axes.flat)[n:]:
        ax.axis("off")
    _save(fig, path)


def plot_stage(outcome, path):
    """Mean accuracy and mean cycle time per combination, in enumeration order."""
    trials: Sequence = outcome.trials
    idx = np.arange(1, len(trials) + 1)
    fig, a1 = plt.subplots(figsize=(7, 4))
    a1.plot(idx, [t.mean_accuracy for t in trials], "o-", color="C0")
    a1.set(xlabel="combination", ylabel="mean accuracy", title=outcome.stage.name)
    a2 = a1.twinx()
    a2.bar(idx, [t.mean_time for t in trials], alpha=0.3, color="C1")
    a2.set_ylabel("mean time (s)")
    _save(fig, path)
