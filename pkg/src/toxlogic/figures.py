"""Matplotlib renderings of benchmark reports (written next to the CSV/JSON)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalkappa import BenchmarkResult, ConfusionMatrix

_DIFFICULTY_COLORS = {0: "#4c72b0", 1: "#dd8452", 2: "#55a868"}


def save_kappa_chart(result: BenchmarkResult, path) -> None:
    """Horizontal bars of kappa per rater pair, one bar hue per difficulty."""
    pairs = list(dict.fromkeys(r.pair for r in result.reports))
    difficulties = sorted({r.difficulty for r in result.reports})
    by_key = {(r.pair, r.difficulty): r.kappa for r in result.reports}
    height = 0.8 / max(len(difficulties), 1)
    fig, ax = plt.subplots(figsize=(7, 1.2 + 1.1 * len(pairs)))
    base = np.arange(len(pairs))[::-1]
    for j, d in enumerate(difficulties):
        ys = base - 0.4 + height * (j + 0.5)
        vals = [by_key.get((p, d), np.nan) for p in pairs]
        ax.barh(ys, vals, height=height * 0.9,
                color=_DIFFICULTY_COLORS.get(d, "gray"), label=str(d))
    ax.set_yticks(base)
    ax.set_yticklabels(pairs)
    ax.set_xlabel("Cohen's kappa")
    ax.set_xlim(min(0.0, *(r.kappa for r in result.reports)) - 0.05, 1.0)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.legend(title="difficulty", loc="lower right")
    ax.grid(axis="x", linestyle=":", alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_confusion_grid(result: BenchmarkResult, path, pair: str | None = None) -> None:
    """Grid of confusion matrices: rows are rater pairs, columns difficulties."""
    keys = sorted(result.matrices, key=lambda k: (k[0], k[1]))
    if pair is not None:
        keys = [k for k in keys if k[0] == pair]
    pairs = list(dict.fromkeys(k[0] for k in keys))
    difficulties = sorted({k[1] for k in keys})
    nrows, ncols = max(len(pairs), 1), max(len(difficulties), 1)
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(3.2 * ncols, 3.0 * nrows), squeeze=False)
    for i, p in enumerate(pairs):
        for j, d in enumerate(difficulties):
            ax = axes[i][j]
            cm = result.matrices.get((p, d))
            if cm is None:
                ax.axis("off")
                continue
            _draw_matrix(ax, cm)
            ax.set_title(f"{p}\ndifficulty {d}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _draw_matrix(ax, cm: ConfusionMatrix) -> None:
    counts = cm.counts
    ax.imshow(counts, cmap="Blues")
    short = [lbl[:7] for lbl in cm.labels]
    ax.set_xticks(range(len(short)))
    ax.set_xticklabels(short, rotation=45, ha="right", fontsize=6)
    ax.set_yticks(range(len(short)))
    ax.set_yticklabels(short, fontsize=6)
    threshold = counts.max() / 2 if counts.max() else 1
    for r in range(counts.shape[0]):
        for c in range(counts.shape[1]):
            if counts[r, c]:
                ax.text(c, r, str(counts[r, c]), ha="center", va="center",
                        fontsize=6,
                        color="white" if counts[r, c] > threshold else "black")
