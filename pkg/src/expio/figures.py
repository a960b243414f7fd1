"""Report figures rendered to PNG files next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ConfusionMatrix, MetricsReport


def confusion_heatmap(matrix: ConfusionMatrix, path: Union[str, Path]) -> None:
    counts = np.asarray(matrix.counts, dtype=float)
    fig, ax = plt.subplots(figsize=(1.2 * len(matrix.labels) + 2, 1.0 * len(matrix.labels) + 2))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(matrix.labels)), matrix.labels, rotation=45, ha="right")
    ax.set_yticks(range(len(matrix.labels)), matrix.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    threshold = counts.max() / 2 if counts.max() > 0 else 0.5
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(
                j,
                i,
                f"{int(counts[i, j])}",
                ha="center",
                va="center",
                color="white" if counts[i, j] > threshold else "black",
                fontsize=8,
            )
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def prf_bars(report: MetricsReport, path: Union[str, Path]) -> None:
    names = list(report.per_label) + ["micro", "macro"]
    rows = list(report.per_label.values()) + [report.micro, report.macro]
    x = np.arange(len(names))
    width = 0.27
    fig, ax = plt.subplots(figsize=(1.4 * len(names) + 2, 4))
    ax.bar(x - width, [r.precision for r in rows], width, label="P")
    ax.bar(x, [r.recall for r in rows], width, label="R")
    ax.bar(x + width, [r.f1 for r in rows], width, label="F1")
    ax.set_xticks(x, names, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def support_bars(support: dict[str, int], path: Union[str, Path]) -> None:
    names = list(support)
    fig, ax = plt.subplots(figsize=(1.4 * max(len(names), 1) + 2, 4))
    ax.bar(names, [support[n] for n in names], color="tab:gray")
    ax.set_ylabel("gold tokens")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def epoch_curve(dev_f1_per_epoch: Sequence[float], path: Union[str, Path]) -> None:
    epochs = np.arange(1, len(dev_f1_per_epoch) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, list(dev_f1_per_epoch), marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("dev micro-F1")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
