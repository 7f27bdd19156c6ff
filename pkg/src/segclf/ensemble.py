"""Weighted soft voting over probability files and pseudo-label rounds.

Probability file format: ``segment_id,<class1>,...,<classK>`` with the class
columns in vocabulary order.  Rows must sum to 1 within 1e-3 (they are
renormalized exactly) and contain no negative entries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClassVocabulary, FeatureTable, LabelVector
from .errors import DataError, ParseError, ValidationError
from .fileio import atomic_path

ROW_SUM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class ProbabilityMatrix:
    """Per-segment class probability distributions over a vocabulary."""

    segment_ids: tuple[str, ...]
    vocab: ClassVocabulary
    probs: np.ndarray

    def __post_init__(self):
        ids = tuple(self.segment_ids)
        probs = np.array(self.probs, dtype=float, copy=True).reshape(len(ids), self.vocab.size)
        object.__setattr__(self, "segment_ids", ids)
        object.__setattr__(self, "probs", probs)
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate segment id in probability matrix")
        if probs.size:
            if not np.isfinite(probs).all():
                raise ValidationError("probabilities must be finite")
            if probs.min() < 0.0:
                raise ValidationError("probabilities must be non-negative")
            sums = probs.sum(axis=1)
            if np.abs(sums - 1.0).max() > 1e-6:
                raise ValidationError("probability rows must sum to 1 within 1e-6")
        probs.flags.writeable = False

    @property
    def n_segments(self) -> int:
        return len(self.segment_ids)


@dataclass(frozen=True)
class EnsembleConfig:
    weights: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.weights or any(w <= 0 for w in self.weights):
            raise ValidationError("ensemble weights must be positive")


@dataclass(frozen=True)
class PseudoLabelConfig:
    confidence_threshold: float = 0.9
    max_rounds: int = 1

    def __post_init__(self):
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValidationError("confidence threshold must lie in (0, 1]")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be at least 1")

    def check_vocab(self, vocab: ClassVocabulary) -> None:
        if self.confidence_threshold <= 1.0 / vocab.size:
            raise ValidationError(
                f"confidence threshold {self.confidence_threshold} must exceed "
                f"1/K = {1.0 / vocab.size:.4f} to be selective"
            )


@dataclass(frozen=True)
class PseudoLabelReport:
    added_segment_ids: tuple[str, ...]
    per_class_counts: tuple[int, ...]

    @property
    def n_added(self) -> int:
        return len(self.added_segment_ids)


def load_probabilities(path: str | Path, vocab: ClassVocabulary) -> ProbabilityMatrix:
    """Load and validate a probability file against a vocabulary."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"probability file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (missing header)") from None
        expected = ["segment_id", *vocab.names]
        if header != expected:
            raise ParseError(
                f"{path}:1: header {header} does not match vocabulary columns {expected}"
            )
        ids: list[str] = []
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(expected)} cells, got {len(row)}"
                )
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError:
                raise ParseError(f"{path}:{line_no}: non-numeric probability") from None
            if any(not np.isfinite(v) for v in values):
                raise ParseError(f"{path}:{line_no}: non-finite probability")
            if any(v < 0 for v in values):
                raise ValidationError(f"{path}:{line_no}: negative probability")
            total = sum(values)
            if abs(total - 1.0) > ROW_SUM_TOLERANCE:
                raise ValidationError(
                    f"{path}:{line_no}: probabilities sum to {total:.6f}, "
                    f"outside 1 +/- {ROW_SUM_TOLERANCE}"
                )
            ids.append(row[0])
            rows.append([v / total for v in values])
    probs = np.array(rows, dtype=float).reshape(len(ids), vocab.size)
    return ProbabilityMatrix(tuple(ids), vocab, probs)


def write_probabilities(matrix: ProbabilityMatrix, path: str | Path) -> None:
    with atomic_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["segment_id", *matrix.vocab.names])
            for i, sid in enumerate(matrix.segment_ids):
                writer.writerow([sid, *(repr(v) for v in matrix.probs[i].tolist())])


def soft_vote(inputs: list[ProbabilityMatrix], cfg: EnsembleConfig) -> ProbabilityMatrix:
    """Weighted average of probability matrices, renormalized row-wise."""
    if not inputs:
        raise DataError("soft voting needs at least one probability matrix")
    if len(cfg.weights) != len(inputs):
        raise DataError(
            f"{len(cfg.weights)} weights for {len(inputs)} probability matrices"
        )
    first = inputs[0]
    for other in inputs[1:]:
        if other.segment_ids != first.segment_ids:
            raise DataError("probability matrices disagree on segment ids or order")
        if other.vocab != first.vocab:
            raise DataError("probability matrices disagree on class vocabulary")
    combined = np.zeros_like(first.probs)
    for weight, matrix in zip(cfg.weights, inputs):
        combined += weight * matrix.probs
    if combined.size:
        combined /= combined.sum(axis=1, keepdims=True)
    return ProbabilityMatrix(first.segment_ids, first.vocab, combined)


def predict_from_probs(matrix: ProbabilityMatrix) -> LabelVector:
    """Row argmax; ties go to the lowest class index."""
    if matrix.n_segments == 0:
        return LabelVector((), np.zeros(0, dtype=np.int64))
    return LabelVector(matrix.segment_ids, matrix.probs.argmax(axis=1).astype(np.int64))


def pseudo_label_round(
    train_x: FeatureTable,
    train_y: LabelVector,
    unlabeled_x: FeatureTable,
    scores: ProbabilityMatrix,
    cfg: PseudoLabelConfig,
) -> tuple[FeatureTable, LabelVector, PseudoLabelReport]:
    """One self-training round: append confident unlabeled segments.

    Segments whose top probability reaches the threshold join the training
    set with their argmax label.  The caller retrains on the result and may
    run another round on the remaining unlabeled segments; a segment appended
    here is no longer unlabeled, so later rounds cannot relabel it.
    """
    cfg.check_vocab(scores.vocab)
    if train_x.segment_ids != train_y.segment_ids:
        raise DataError("training features and labels must be aligned")
    if train_x.feature_names != unlabeled_x.feature_names:
        raise DataError("training and unlabeled tables disagree on feature columns")
    if scores.segment_ids != unlabeled_x.segment_ids:
        raise DataError("scores must cover exactly the unlabeled segments, in order")
    overlap = set(train_x.segment_ids) & set(unlabeled_x.segment_ids)
    if overlap:
        raise DataError(
            f"unlabeled segments overlap the training set: {sorted(overlap)[:5]}"
        )
    if scores.n_segments:
        confident = np.flatnonzero(scores.probs.max(axis=1) >= cfg.confidence_threshold)
    else:
        confident = np.zeros(0, dtype=int)
    added_ids = tuple(unlabeled_x.segment_ids[i] for i in confident)
    added_labels = scores.probs[confident].argmax(axis=1).astype(np.int64)
    per_class = np.bincount(added_labels, minlength=scores.vocab.size)
    augmented_x = FeatureTable(
        train_x.segment_ids + added_ids,
        train_x.feature_names,
        np.vstack([train_x.values, unlabeled_x.values[confident]])
        if confident.size
        else train_x.values,
    )
    augmented_y = LabelVector(
        train_y.segment_ids + added_ids,
        np.concatenate([train_y.labels, added_labels]),
    )
    report = PseudoLabelReport(added_ids, tuple(int(c) for c in per_class))
    return augmented_x, augmented_y, report
