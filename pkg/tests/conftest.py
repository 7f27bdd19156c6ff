import numpy as np
import pytest

from segclf.dataset import ClassVocabulary, FeatureTable, LabelVector


def make_table(values, ids=None, names=None) -> FeatureTable:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n, d = values.shape
    ids = tuple(f"s{i}" for i in range(n)) if ids is None else tuple(ids)
    names = tuple(f"f{j}" for j in range(d)) if names is None else tuple(names)
    return FeatureTable(ids, names, values)


def make_labels(labels, ids=None) -> LabelVector:
    labels = np.asarray(labels, dtype=np.int64)
    ids = tuple(f"s{i}" for i in range(len(labels))) if ids is None else tuple(ids)
    return LabelVector(ids, labels)


@pytest.fixture
def vocab2() -> ClassVocabulary:
    return ClassVocabulary(("neg", "pos"))


@pytest.fixture
def vocab3() -> ClassVocabulary:
    return ClassVocabulary(("low", "medium", "high"))
