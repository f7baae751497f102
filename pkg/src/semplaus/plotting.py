"""Report figures. Everything renders off-screen to files."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import FrequencyTable, SimilarityMatrix  # noqa: E402
from .evaluation import MetricsReport, roc_points  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_frequencies(table: FrequencyTable, path, title: str | None = None) -> Path:
    """Horizontal bars of the top words, most frequent on top."""
    with plt.rc_context(STYLE):
        n = max(len(table.entries), 1)
        fig, ax = plt.subplots(figsize=(4.5, 0.22 * n + 1.0))
        words = [w for w, _ in table.entries][::-1]
        counts = [c for _, c in table.entries][::-1]
        ax.barh(words, counts, color="#4c72b0" if table.label else "#c44e52")
        ax.set_xlabel("count")
        ax.set_title(title or ("plausible" if table.label else "implausible"))
        return _save(fig, path)


def plot_similarity(matrix: SimilarityMatrix, path, title: str | None = None) -> Path:
    with plt.rc_context(STYLE):
        h, w = matrix.values.shape
        fig, ax = plt.subplots(figsize=(0.3 * w + 2.0, 0.3 * h + 1.5))
        im = ax.imshow(matrix.values, vmin=-1, vmax=1, cmap="RdBu_r")
        ax.set_xticks(range(w), matrix.cols, rotation=90)
        ax.set_yticks(range(h), matrix.rows)
        ax.set_xlabel("implausible top words")
        ax.set_ylabel("plausible top words")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8, label="cosine similarity")
        return _save(fig, path)


def plot_roc(scores: Sequence[float], golds: Sequence[int], path, auc: float | None = None) -> Path:
    fpr, tpr = roc_points(scores, golds)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.5, 3.5))
        ax.plot([0, 1], [0, 1], ls=":", c="0.6")
        ax.step(fpr, tpr, where="post", label=f"AUC = {auc:.3f}" if auc is not None else None)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        if auc is not None:
            ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def plot_confusion(report: MetricsReport, path, title: str | None = None) -> Path:
    c = report.confusion
    grid = np.array([[c.tn, c.fp], [c.fn, c.tp]])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.0, 2.8))
        ax.imshow(grid, cmap="Blues")
        for (i, j), v in np.ndenumerate(grid):
            ax.text(j, i, str(v), ha="center", va="center", color="white" if v > grid.max() / 2 else "black")
        ax.set_xticks([0, 1], ["0", "1"])
        ax.set_yticks([0, 1], ["0", "1"])
        ax.set_xlabel("predicted")
        ax.set_ylabel("gold")
        if title:
            ax.set_title(title)
        return _save(fig, path)
