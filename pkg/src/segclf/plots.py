"""Figure rendering for the report-producing commands.

Figures are written next to the delimited outputs: the per-feature score
profile alongside f_scores.csv, and a confusion heatmap alongside the score
tables.  PNG metadata is stripped so identical runs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fileio import atomic_path
from .metrics import ConfusionMatrix
from .selection import SelectionReport

_SAVE_KWARGS = dict(format="png", dpi=150, metadata={"Software": None})


def render_score_profile(report: SelectionReport, path: str | Path) -> None:
    """Bar profile of univariate F-scores, retained features highlighted."""
    idx = np.arange(len(report.feature_names))
    sel = report.selected
    fig, ax = plt.subplots(figsize=(10, 4))
    if (~sel).any():
        ax.bar(idx[~sel], report.f_scores[~sel], width=1.0, color="#b0b0b0", label="dropped")
    if sel.any():
        ax.bar(idx[sel], report.f_scores[sel], width=1.0, color="#d62728",
               label=f"selected (k={report.k})")
    ax.set_xlabel("feature index")
    ax.set_ylabel("ANOVA F-score")
    ax.set_title("Univariate feature scores")
    ax.legend(loc="upper right")
    fig.tight_layout()
    with atomic_path(path) as tmp:
        fig.savefig(tmp, **_SAVE_KWARGS)
    plt.close(fig)


def render_confusion_heatmap(cm: ConfusionMatrix, path: str | Path) -> None:
    k = cm.vocab.size
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * k + 2), max(3.5, 0.7 * k + 1.5)))
    image = ax.imshow(cm.counts, cmap="Blues")
    ax.set_xticks(range(k), cm.vocab.names, rotation=45, ha="right")
    ax.set_yticks(range(k), cm.vocab.names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("reference")
    threshold = cm.counts.max() / 2 if cm.total else 0
    for i in range(k):
        for j in range(k):
            ax.text(
                j, i, str(int(cm.counts[i, j])),
                ha="center", va="center",
                color="white" if cm.counts[i, j] > threshold else "black",
                fontsize=8,
            )
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    with atomic_path(path) as tmp:
        fig.savefig(tmp, **_SAVE_KWARGS)
    plt.close(fig)
