"""Gaussian-blob fixture generator for pipeline tests and demos.

Class centers live on a small set of informative dimensions; every other
column is pure standard-normal noise.  Each informative dimension separates
a random nonempty proper subset of the classes from the rest by `separation`
(in noise-sigma units), so every informative column carries class signal and
class centers stay reliably far apart.  Generation is deterministic given
the seed and always draws partitions in the order train, test, unlabeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClassVocabulary, FeatureTable, LabelVector
from .errors import ValidationError


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 600
    n_test: int = 200
    n_unlabeled: int = 0
    n_features: int = 500
    n_informative: int = 20
    separation: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 0 or self.n_unlabeled < 0:
            raise ValidationError("synthetic partition sizes must be non-negative (train >= 1)")
        if not 1 <= self.n_informative <= self.n_features:
            raise ValidationError(
                f"n_informative must lie in [1, {self.n_features}], got {self.n_informative}"
            )
        if self.separation <= 0:
            raise ValidationError("separation must be positive")


@dataclass(frozen=True)
class GeneratedData:
    partitions: dict[str, tuple[FeatureTable, LabelVector]]
    informative_indices: tuple[int, ...]
    vocab: ClassVocabulary


def generate_blobs(spec: SyntheticSpec, vocab: ClassVocabulary) -> GeneratedData:
    rng = np.random.default_rng(int(spec.seed) & ((1 << 64) - 1))
    k = vocab.size
    informative = np.sort(rng.choice(spec.n_features, size=spec.n_informative, replace=False))
    centers = np.full((k, spec.n_informative), -spec.separation / 2.0)
    for j in range(spec.n_informative):
        subset_size = int(rng.integers(1, k))
        subset = rng.permutation(k)[:subset_size]
        centers[subset, j] = spec.separation / 2.0
    width = max(3, len(str(spec.n_features - 1)))
    names = tuple(f"f{j:0{width}d}" for j in range(spec.n_features))

    def draw(partition: str, n: int) -> tuple[FeatureTable, LabelVector]:
        labels = rng.permutation(np.tile(np.arange(k), n // k + 1)[:n]).astype(np.int64)
        values = rng.standard_normal((n, spec.n_features))
        values[:, informative] += centers[labels]
        ids = tuple(f"{partition}_{i:05d}" for i in range(n))
        return FeatureTable(ids, names, values), LabelVector(ids, labels)

    partitions = {"train": draw("train", spec.n_train)}
    if spec.n_test:
        partitions["test"] = draw("test", spec.n_test)
    if spec.n_unlabeled:
        partitions["unlabeled"] = draw("unlabeled", spec.n_unlabeled)
    return GeneratedData(partitions, tuple(int(i) for i in informative), vocab)
