"""Per-segment feature tables and label vectors.

File formats (all comma-delimited UTF-8 text with a header row):

* feature file:   ``segment_id,<f1>,<f2>,...`` - one row per segment, numeric
  cells with optional scientific notation
* label file:     ``segment_id,label`` (an optional third ``provenance``
  column, as written by the pseudo-labeling command, is tolerated and ignored)
* partition file: ``segment_id,partition`` with partition in {train, devel, test}

Values are validated to be finite on ingestion; floats are written with
``repr`` so a write/load round trip is bit-exact.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, DataError, ParseError, ValidationError
from .fileio import atomic_path

logger = logging.getLogger(__name__)

PARTITIONS = ("train", "devel", "test")

TOPIC_CLASSES = (
    "performance",
    "interior-features",
    "quality-aeshetic",
    "comfort",
    "handling",
    "safety",
    "general-information",
    "cost",
    "user-experience",
    "exterior-features",
)
LEVEL_CLASSES = ("low", "medium", "high")


def _check_segment_id(token: str) -> str:
    if not token:
        raise ValidationError("empty segment id")
    if "," in token or "\n" in token or "\r" in token:
        raise ValidationError(f"segment id {token!r} contains a delimiter character")
    return token


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered class names; the class index is the position in the list."""

    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 2:
            raise ValidationError("a class vocabulary needs at least 2 classes")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("class names must be distinct")

    @property
    def size(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown class {name!r}") from None


def vocabulary_for_task(task: str) -> ClassVocabulary:
    """Default vocabularies: 10 topic classes, 3 levels for arousal/valence."""
    if task == "topic":
        return ClassVocabulary(TOPIC_CLASSES)
    if task in ("arousal", "valence"):
        return ClassVocabulary(LEVEL_CLASSES)
    raise ValidationError(f"unknown task {task!r} (expected topic, arousal, or valence)")


@dataclass(frozen=True)
class FeatureTable:
    """N segments by D named feature columns of finite reals."""

    segment_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        ids = tuple(_check_segment_id(s) for s in self.segment_ids)
        names = tuple(self.feature_names)
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            values = values.reshape(len(ids), len(names))
        object.__setattr__(self, "segment_ids", ids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", values)
        if len(set(ids)) != len(ids):
            dup = _first_duplicate(ids)
            raise ValidationError(f"duplicate segment id {dup!r}")
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be distinct")
        if values.shape != (len(ids), len(names)):
            raise ValidationError(
                f"value matrix shape {values.shape} does not match "
                f"{len(ids)} segments x {len(names)} features"
            )
        if values.size and not np.isfinite(values).all():
            raise ValidationError("feature values must be finite")
        values.flags.writeable = False

    @property
    def n_segments(self) -> int:
        return len(self.segment_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def take_rows(self, indices) -> "FeatureTable":
        ids = tuple(self.segment_ids[i] for i in indices)
        return FeatureTable(ids, self.feature_names, self.values[np.asarray(indices, dtype=int)])


@dataclass(frozen=True)
class LabelVector:
    """Class indices (into some ClassVocabulary) for a list of segments."""

    segment_ids: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        ids = tuple(_check_segment_id(s) for s in self.segment_ids)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        object.__setattr__(self, "segment_ids", ids)
        object.__setattr__(self, "labels", labels)
        if len(set(ids)) != len(ids):
            dup = _first_duplicate(ids)
            raise ValidationError(f"duplicate segment id {dup!r}")
        if labels.shape != (len(ids),):
            raise ValidationError(
                f"{len(ids)} segment ids but {labels.shape} labels"
            )
        if labels.size and labels.min() < 0:
            raise ValidationError("class indices must be non-negative")
        labels.flags.writeable = False

    @property
    def n_segments(self) -> int:
        return len(self.segment_ids)

    def check_vocab(self, vocab: ClassVocabulary) -> None:
        if self.labels.size and int(self.labels.max()) >= vocab.size:
            raise ValidationError(
                f"label index {int(self.labels.max())} out of range for "
                f"{vocab.size}-class vocabulary"
            )

    def take_rows(self, indices) -> "LabelVector":
        ids = tuple(self.segment_ids[i] for i in indices)
        return LabelVector(ids, self.labels[np.asarray(indices, dtype=int)])


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-score parameters, fitted on a training partition only."""

    means: np.ndarray
    std_devs: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float, copy=True)
        stds = np.array(self.std_devs, dtype=float, copy=True)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "std_devs", stds)
        if means.shape != stds.shape or means.ndim != 1:
            raise ValidationError("standardizer means/std_devs must be 1-D and equal length")
        if stds.size and (stds <= 0).any():
            raise ValidationError("standardizer std_devs must be positive")
        means.flags.writeable = False
        stds.flags.writeable = False

    @property
    def n_features(self) -> int:
        return self.means.shape[0]


def _first_duplicate(items) -> str:
    seen = set()
    for it in items:
        if it in seen:
            return it
        seen.add(it)
    return ""


def _parse_cell(raw: str, path, line_no: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"{path}:{line_no}: non-numeric cell {raw!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"{path}:{line_no}: non-finite cell {raw!r}")
    return value


def load_feature_table(path: str | Path) -> FeatureTable:
    """Load a feature file; row order is preserved from the file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (missing header)") from None
        if not header or header[0] != "segment_id":
            raise ParseError(f"{path}:1: first header cell must be 'segment_id'")
        feature_names = tuple(header[1:])
        ids: list[str] = []
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}"
                )
            ids.append(row[0])
            rows.append([_parse_cell(cell, path, line_no) for cell in row[1:]])
    values = np.array(rows, dtype=float).reshape(len(ids), len(feature_names))
    try:
        return FeatureTable(tuple(ids), feature_names, values)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_feature_table(table: FeatureTable, path: str | Path) -> None:
    """Write a feature file with full-precision (repr) floats."""
    with atomic_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["segment_id", *table.feature_names])
            for i, sid in enumerate(table.segment_ids):
                writer.writerow([sid, *(repr(v) for v in table.values[i].tolist())])


def load_labels(path: str | Path, vocab: ClassVocabulary) -> LabelVector:
    """Load a label file, mapping class names to vocabulary indices."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"label file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (missing header)") from None
        if len(header) < 2 or header[0] != "segment_id" or header[1] != "label":
            raise ParseError(f"{path}:1: header must start with 'segment_id,label'")
        if len(header) > 3 or (len(header) == 3 and header[2] != "provenance"):
            raise ParseError(f"{path}:1: unexpected extra columns {header[2:]}")
        ids: list[str] = []
        indices: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}"
                )
            ids.append(row[0])
            try:
                indices.append(vocab.index_of(row[1]))
            except ValidationError:
                raise ValidationError(
                    f"{path}:{line_no}: label {row[1]!r} not in vocabulary"
                ) from None
    try:
        return LabelVector(tuple(ids), np.array(indices, dtype=np.int64))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_labels(
    labels: LabelVector,
    vocab: ClassVocabulary,
    path: str | Path,
    provenance: list[str] | None = None,
) -> None:
    """Write a label file; an optional provenance column tags each row."""
    labels.check_vocab(vocab)
    if provenance is not None and len(provenance) != labels.n_segments:
        raise ValidationError(
            f"{len(provenance)} provenance entries for {labels.n_segments} segments"
        )
    with atomic_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if provenance is None:
                writer.writerow(["segment_id", "label"])
                for sid, idx in zip(labels.segment_ids, labels.labels.tolist()):
                    writer.writerow([sid, vocab.names[idx]])
            else:
                writer.writerow(["segment_id", "label", "provenance"])
                for sid, idx, src in zip(labels.segment_ids, labels.labels.tolist(), provenance):
                    writer.writerow([sid, vocab.names[idx], src])


def read_label_provenance(path: str | Path) -> dict[str, str] | None:
    """Provenance column of a label file keyed by segment id, or None."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"label file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3 or header[2] != "provenance":
            return None
        return {row[0]: row[2] for row in reader if row}


def load_partition_map(path: str | Path) -> dict[str, str]:
    """Load a partition file into {segment_id: partition}."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"partition file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (missing header)") from None
        if header != ["segment_id", "partition"]:
            raise ParseError(f"{path}:1: header must be 'segment_id,partition'")
        mapping: dict[str, str] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{line_no}: expected 2 cells, got {len(row)}")
            sid, part = row
            if part not in PARTITIONS:
                raise ValidationError(
                    f"{path}:{line_no}: partition {part!r} not in {PARTITIONS}"
                )
            if sid in mapping:
                raise ValidationError(f"{path}:{line_no}: duplicate segment id {sid!r}")
            mapping[sid] = part
    return mapping


def split_by_partition(table: FeatureTable, mapping: dict[str, str]) -> dict[str, FeatureTable]:
    """Split a feature table into per-partition tables; unmapped rows are dropped."""
    buckets: dict[str, list[int]] = {p: [] for p in PARTITIONS}
    dropped = 0
    for i, sid in enumerate(table.segment_ids):
        part = mapping.get(sid)
        if part is None:
            dropped += 1
        else:
            buckets[part].append(i)
    if dropped:
        logger.info("partition split dropped %d unmapped segments", dropped)
    return {p: table.take_rows(idx) for p, idx in buckets.items() if idx}


def align(features: FeatureTable, labels: LabelVector) -> tuple[FeatureTable, LabelVector]:
    """Restrict both inputs to their common segment ids, in the table's order.

    Unmatched segments are dropped (drop counts are logged); an empty
    intersection raises AlignmentError.
    """
    by_id = {sid: i for i, sid in enumerate(labels.segment_ids)}
    keep_rows = [i for i, sid in enumerate(features.segment_ids) if sid in by_id]
    if not keep_rows:
        raise AlignmentError("feature table and labels share no segment ids")
    dropped_features = features.n_segments - len(keep_rows)
    dropped_labels = labels.n_segments - len(keep_rows)
    if dropped_features or dropped_labels:
        logger.info(
            "alignment dropped %d feature rows and %d label rows",
            dropped_features,
            dropped_labels,
        )
    if dropped_features == 0 and dropped_labels == 0:
        ordered = [by_id[sid] for sid in features.segment_ids]
        if ordered == list(range(labels.n_segments)):
            return features, labels
    aligned_features = features.take_rows(keep_rows)
    aligned_labels = labels.take_rows([by_id[features.segment_ids[i]] for i in keep_rows])
    return aligned_features, aligned_labels


def fit_standardizer(train: FeatureTable) -> Standardizer:
    """Per-column mean and population std; zero-variance columns store std 1."""
    if train.n_segments == 0:
        raise DataError("cannot fit a standardizer on an empty table")
    means = train.values.mean(axis=0)
    stds = train.values.std(axis=0)  # population (divide by N)
    stds = np.where(stds == 0.0, 1.0, stds)
    return Standardizer(means, stds)


def apply_standardizer(s: Standardizer, table: FeatureTable) -> FeatureTable:
    if table.n_features != s.n_features:
        raise DataError(
            f"standardizer fitted on {s.n_features} features, table has {table.n_features}"
        )
    return FeatureTable(
        table.segment_ids,
        table.feature_names,
        (table.values - s.means) / s.std_devs,
    )
