"""Univariate feature scoring with the one-way ANOVA F-statistic.

For each feature column, with g classes present among N samples:

    F = (SSB / (g - 1)) / (SSW / (N - g))

where SSB is the between-class sum of squares sum_c n_c*(mean_c - grand)^2
and SSW the within-class sum sum_c sum_{i in c} (x_i - mean_c)^2.  Columns
with SSB = 0 score 0; columns with SSW = 0 but SSB > 0 score the sentinel
LARGE_F (kept finite so exports stay parseable).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FeatureTable, LabelVector
from .errors import DataError, ValidationError
from .fileio import atomic_path

LARGE_F = 1e12

SCORE_HEADER = ("feature_index", "feature_name", "f_score", "selected")


@dataclass(frozen=True)
class SelectionReport:
    """Per-feature F-scores plus the retained-feature mask."""

    feature_names: tuple[str, ...]
    f_scores: np.ndarray
    selected: np.ndarray
    k: int

    def __post_init__(self):
        names = tuple(self.feature_names)
        scores = np.array(self.f_scores, dtype=float, copy=True)
        mask = np.array(self.selected, dtype=bool, copy=True)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "f_scores", scores)
        object.__setattr__(self, "selected", mask)
        if not (len(names) == scores.shape[0] == mask.shape[0]):
            raise ValidationError("selection report fields must have equal length")
        if int(mask.sum()) != self.k:
            raise ValidationError(f"mask selects {int(mask.sum())} features, k is {self.k}")
        scores.flags.writeable = False
        mask.flags.writeable = False


def anova_f_scores(features: FeatureTable, labels: LabelVector) -> np.ndarray:
    """One F-score per feature column, against the aligned labels.

    Classes absent from the data are simply not part of g; a warning is
    emitted when the labels leave vocabulary classes unrepresented upstream.
    """
    if features.segment_ids != labels.segment_ids:
        raise DataError("features and labels must be aligned before scoring")
    y = labels.labels
    n = features.n_segments
    present, counts = np.unique(y, return_counts=True)
    g = present.shape[0]
    if g < 2:
        raise DataError(f"ANOVA scoring needs at least 2 classes present, got {g}")
    if n <= g:
        raise DataError(
            f"ANOVA scoring needs more samples ({n}) than classes present ({g})"
        )
    x = features.values
    grand_mean = x.mean(axis=0)
    # Two-pass evaluation: group means first, then squared deviations.
    # This keeps scores stable under per-column shifts.
    ssb = np.zeros(features.n_features)
    ssw = np.zeros(features.n_features)
    for cls, n_c in zip(present.tolist(), counts.tolist()):
        rows = x[y == cls]
        mean_c = rows.mean(axis=0)
        ssb += n_c * (mean_c - grand_mean) ** 2
        ssw += ((rows - mean_c) ** 2).sum(axis=0)
    msb = ssb / (g - 1)
    msw = ssw / (n - g)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = msb / msw
    f = np.where(ssb == 0.0, 0.0, f)
    f = np.where((ssw == 0.0) & (ssb > 0.0), LARGE_F, f)
    # Constant columns are exactly zero; the formula can leave rounding dust.
    f = np.where(x.max(axis=0) == x.min(axis=0), 0.0, f)
    return f


def _report_from_scores(
    feature_names: tuple[str, ...], scores: np.ndarray, k: int
) -> SelectionReport:
    d = scores.shape[0]
    if not 1 <= k <= d:
        raise DataError(f"k must be in [1, {d}], got {k}")
    # Stable sort on descending score: ties go to the lower column index.
    order = np.argsort(-scores, kind="stable")
    mask = np.zeros(d, dtype=bool)
    mask[order[:k]] = True
    return SelectionReport(feature_names, scores, mask, k)


def select_top_k(features: FeatureTable, labels: LabelVector, k: int) -> SelectionReport:
    """Retain the k highest-F features; ties broken by lower column index."""
    scores = anova_f_scores(features, labels)
    return _report_from_scores(features.feature_names, scores, k)


def select_percentile(
    features: FeatureTable, labels: LabelVector, percentile: float
) -> SelectionReport:
    """Retain the top `percentile` percent of features (at least one)."""
    if not 0 < percentile <= 100:
        raise DataError(f"percentile must be in (0, 100], got {percentile}")
    k = max(1, int(features.n_features * percentile / 100.0))
    return select_top_k(features, labels, k)


def apply_selection(report: SelectionReport, table: FeatureTable) -> FeatureTable:
    """Project a table onto the selected columns, order preserved."""
    if table.feature_names != report.feature_names:
        raise DataError("table feature names do not match the selection report")
    keep = np.flatnonzero(report.selected)
    return FeatureTable(
        table.segment_ids,
        tuple(report.feature_names[i] for i in keep),
        table.values[:, keep],
    )


def export_scores(report: SelectionReport, path: str | Path) -> None:
    """Write the plot-ready per-feature score table.

    Columns: feature_index,feature_name,f_score,selected.  Scores are written
    with full precision including the LARGE_F sentinel.
    """
    with atomic_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SCORE_HEADER)
            for i, name in enumerate(report.feature_names):
                writer.writerow(
                    [i, name, repr(float(report.f_scores[i])), str(bool(report.selected[i])).lower()]
                )


def warn_absent_classes(labels: LabelVector, vocab_size: int) -> None:
    """Warn when vocabulary classes have no samples (they are excluded from g)."""
    present = set(np.unique(labels.labels).tolist())
    absent = sorted(set(range(vocab_size)) - present)
    if absent:
        warnings.warn(
            f"classes {absent} have no samples and are excluded from ANOVA scoring",
            stacklevel=2,
        )
