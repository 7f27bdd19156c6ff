"""K-nearest-neighbors classifier over Euclidean distance.

Distance ties are broken by the lower training-row index (stable sort) and
class ties among the k neighbors by the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import FeatureTable, LabelVector
from .errors import DataError, ValidationError


@dataclass(frozen=True)
class KnnConfig:
    k_neighbors: int = 5

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be at least 1")


@dataclass(frozen=True)
class KnnModel:
    train_values: np.ndarray
    train_labels: np.ndarray
    n_classes: int
    config: KnnConfig = field(default_factory=KnnConfig)

    def __post_init__(self):
        values = np.array(self.train_values, dtype=float, copy=True)
        labels = np.array(self.train_labels, dtype=np.int64, copy=True)
        if values.ndim != 2 or labels.shape != (values.shape[0],):
            raise ValidationError("knn model values/labels disagree in shape")
        if self.config.k_neighbors > values.shape[0]:
            raise ValidationError(
                f"k_neighbors={self.config.k_neighbors} exceeds {values.shape[0]} training rows"
            )
        values.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "train_values", values)
        object.__setattr__(self, "train_labels", labels)

    @property
    def n_features(self) -> int:
        return self.train_values.shape[1]


def knn_train(
    x: FeatureTable, y: LabelVector, cfg: KnnConfig, n_classes: int | None = None
) -> KnnModel:
    if x.segment_ids != y.segment_ids:
        raise DataError("features and labels must be aligned before KNN training")
    if x.n_segments == 0:
        raise DataError("cannot train KNN on an empty table")
    k = int(y.labels.max()) + 1 if n_classes is None else int(n_classes)
    return KnnModel(x.values, y.labels, k, cfg)


def knn_predict(model: KnnModel, t: FeatureTable) -> LabelVector:
    """Majority class among the k nearest training points per segment."""
    if t.n_features != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, table has {t.n_features}"
        )
    if t.n_segments == 0:
        return LabelVector((), np.zeros(0, dtype=np.int64))
    q = t.values
    train = model.train_values
    sq = (q * q).sum(axis=1)[:, None] + (train * train).sum(axis=1)[None, :] - 2.0 * (q @ train.T)
    np.maximum(sq, 0.0, out=sq)
    nearest = np.argsort(sq, axis=1, kind="stable")[:, : model.config.k_neighbors]
    out = np.empty(t.n_segments, dtype=np.int64)
    for i in range(t.n_segments):
        tally = np.bincount(model.train_labels[nearest[i]], minlength=model.n_classes)
        out[i] = tally.argmax()
    return LabelVector(t.segment_ids, out)
