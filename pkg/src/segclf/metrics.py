"""Scoring: confusion matrices, micro/macro F1, UAR, and a combined score.

micro-F1 equals overall accuracy for single-label multiclass predictions
(trace over total).  Reference classes absent from the scored set are
excluded from UAR and macro averages, with a warning.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClassVocabulary, LabelVector
from .errors import AlignmentError, DataError, ValidationError
from .fileio import atomic_path

DEFAULT_COMBINED_WEIGHTS = (0.66, 0.34)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[r][p] = segments with reference class r predicted as p."""

    vocab: ClassVocabulary
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.shape != (self.vocab.size, self.vocab.size):
            raise ValidationError(
                f"confusion matrix shape {counts.shape} does not match "
                f"{self.vocab.size} classes"
            )
        if counts.min(initial=0) < 0:
            raise ValidationError("confusion counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ScoreReport:
    micro_f1: float
    macro_f1: float
    uar: float
    combined: float
    combined_weights: tuple[float, float] = DEFAULT_COMBINED_WEIGHTS

    def as_rows(self) -> list[tuple[str, float]]:
        return [
            ("micro_f1", self.micro_f1),
            ("macro_f1", self.macro_f1),
            ("uar", self.uar),
            ("combined", self.combined),
        ]


def confusion(
    reference: LabelVector, predicted: LabelVector, vocab: ClassVocabulary
) -> ConfusionMatrix:
    """Tally reference vs predicted over the common segment ids."""
    reference.check_vocab(vocab)
    predicted.check_vocab(vocab)
    pred_by_id = {sid: int(lab) for sid, lab in zip(predicted.segment_ids, predicted.labels)}
    counts = np.zeros((vocab.size, vocab.size), dtype=np.int64)
    matched = 0
    for sid, ref in zip(reference.segment_ids, reference.labels):
        pred = pred_by_id.get(sid)
        if pred is None:
            continue
        counts[int(ref), pred] += 1
        matched += 1
    if reference.n_segments or predicted.n_segments:
        if matched == 0:
            raise AlignmentError("reference and predictions share no segment ids")
    return ConfusionMatrix(vocab, counts)


def score(
    cm: ConfusionMatrix,
    combined_weights: tuple[float, float] = DEFAULT_COMBINED_WEIGHTS,
) -> ScoreReport:
    w_f1, w_uar = (float(w) for w in combined_weights)
    if w_f1 < 0 or w_uar < 0 or abs(w_f1 + w_uar - 1.0) > 1e-9:
        raise DataError(f"combined weights must be non-negative and sum to 1, got {combined_weights}")
    total = cm.total
    if total < 1:
        raise DataError("cannot score an empty confusion matrix")
    counts = cm.counts.astype(float)
    diag = np.diag(counts)
    row_totals = counts.sum(axis=1)
    col_totals = counts.sum(axis=0)
    included = np.flatnonzero(row_totals > 0)
    excluded = np.flatnonzero(row_totals == 0)
    if excluded.size:
        names = [cm.vocab.names[i] for i in excluded]
        warnings.warn(
            f"classes {names} have no reference segments and are excluded "
            "from UAR and macro-F1",
            stacklevel=2,
        )
    recalls = diag[included] / row_totals[included]
    col_safe = np.where(col_totals[included] > 0, col_totals[included], 1.0)
    precisions = np.where(col_totals[included] > 0, diag[included] / col_safe, 0.0)
    pr_sum = precisions + recalls
    f1 = np.where(pr_sum > 0, 2.0 * precisions * recalls / np.where(pr_sum > 0, pr_sum, 1.0), 0.0)
    micro = float(diag.sum() / total)
    uar = float(recalls.mean())
    macro = float(f1.mean())
    return ScoreReport(
        micro_f1=micro,
        macro_f1=macro,
        uar=uar,
        combined=w_f1 * micro + w_uar * uar,
        combined_weights=(w_f1, w_uar),
    )


def write_score_table(report: ScoreReport, path: str | Path) -> None:
    """Machine-readable metric,value table with full-precision values."""
    with atomic_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "value"])
            for name, value in report.as_rows():
                writer.writerow([name, repr(value)])


def write_confusion(cm: ConfusionMatrix, path: str | Path) -> None:
    """K x K count table with class-name headers; rows are reference classes."""
    with atomic_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["reference", *cm.vocab.names])
            for i, name in enumerate(cm.vocab.names):
                writer.writerow([name, *cm.counts[i].tolist()])


def render_text_report(cm: ConfusionMatrix, report: ScoreReport) -> str:
    """Human-readable summary with per-class recall/precision."""
    counts = cm.counts.astype(float)
    diag = np.diag(counts)
    row_totals = counts.sum(axis=1)
    col_totals = counts.sum(axis=0)
    lines = [
        f"segments scored: {cm.total}",
        "",
        f"micro_f1 (accuracy): {report.micro_f1:.4f}",
        f"macro_f1:            {report.macro_f1:.4f}",
        f"uar:                 {report.uar:.4f}",
        f"combined ({report.combined_weights[0]:g}*micro_f1 + "
        f"{report.combined_weights[1]:g}*uar): {report.combined:.4f}",
        "",
        "per-class:",
    ]
    width = max(len(n) for n in cm.vocab.names)
    for i, name in enumerate(cm.vocab.names):
        recall = diag[i] / row_totals[i] if row_totals[i] else float("nan")
        precision = diag[i] / col_totals[i] if col_totals[i] else float("nan")
        lines.append(
            f"  {name:<{width}}  n={int(row_totals[i]):>6}  "
            f"recall={recall:.4f}  precision={precision:.4f}"
        )
    return "\n".join(lines) + "\n"
