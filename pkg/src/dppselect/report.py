"""Matplotlib figures rendered next to the delimited command outputs.

Figures are written with fixed metadata and no timestamps, so repeated
runs over the same inputs produce byte-identical image files.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PNG_METADATA = {"Software": "dppselect"}
_DPI = 120


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def save_loss_curve(losses: Sequence[float], path: str) -> None:
    """Per-epoch training loss as a line plot."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(range(1, len(losses) + 1), losses, lw=1.5, color="tab:blue")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean per-article loss")
    ax.set_title("distillation loss")
    ax.grid(alpha=0.3)
    _save(fig, path)


def save_diversity_figure(mean_pcds: Sequence[float], max_pcds: Sequence[float],
                          path: str) -> None:
    """Histograms of per-article mean and max pairwise cosine distance."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.4), sharey=True)
    for ax, values, label, color in (
        (axes[0], mean_pcds, "mean PCD", "tab:blue"),
        (axes[1], max_pcds, "max PCD", "tab:orange"),
    ):
        ax.hist(values, bins=20, color=color, edgecolor="black", lw=0.4)
        ax.set_xlabel(label)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("articles")
    fig.suptitle("pairwise cosine distance over filtered selections")
    _save(fig, path)


def save_precision_figure(precisions: Sequence[float], path: str) -> None:
    """Histogram of per-article image precision."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.hist(precisions, bins=20, range=(0.0, 100.0), color="tab:green",
            edgecolor="black", lw=0.4)
    ax.set_xlabel("image precision (%)")
    ax.set_ylabel("articles")
    ax.grid(alpha=0.3)
    _save(fig, path)
