"""Random forest of depth-limited CART trees with Gini splits.

Each tree grows on a seeded bootstrap resample (N draws with replacement).
Node splits greedily minimize the weighted Gini impurity over a per-node
random feature subset; growth stops at max_depth, at pure nodes, or below
min_samples_split.  Training is deterministic given the seed: tree t draws
from ``default_rng([seed, t])`` and features are examined in draw order with
first-best tie breaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import ClassVocabulary, FeatureTable, LabelVector
from .ensemble import ProbabilityMatrix
from .errors import DataError, ValidationError

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 7
    min_samples_split: int = 2
    features_per_split: str | int = "sqrt"  # "sqrt", "all", or an explicit count
    seed: int = 0
    max_depth_raw: float | None = None  # provenance for non-integral configured depths

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("forest needs at least 1 tree")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be at least 1")
        if self.min_samples_split < 2:
            raise ValidationError("min_samples_split must be at least 2")
        if isinstance(self.features_per_split, str):
            if self.features_per_split not in ("sqrt", "all"):
                raise ValidationError(
                    f"features_per_split must be sqrt, all, or a count, "
                    f"got {self.features_per_split!r}"
                )
        elif self.features_per_split < 1:
            raise ValidationError("features_per_split count must be positive")
        if self.max_depth_raw is not None and math.floor(self.max_depth_raw) != self.max_depth:
            raise ValidationError(
                f"raw depth {self.max_depth_raw} does not floor to {self.max_depth}"
            )

    def n_split_features(self, n_features: int) -> int:
        if self.features_per_split == "all":
            return n_features
        if self.features_per_split == "sqrt":
            return max(1, math.isqrt(n_features))
        return min(int(self.features_per_split), n_features)


@dataclass
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (class counts)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.counts is not None


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNode, ...]
    n_classes: int
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)


def _best_split_for_feature(xv: np.ndarray, yv: np.ndarray, n_classes: int):
    """Best (sum-of-squared-fractions score, threshold) for one column.

    Maximizing sum_c counts_c^2/n over both sides is equivalent to minimizing
    the weighted Gini impurity; higher scores are better splits.
    """
    n = xv.shape[0]
    order = np.argsort(xv, kind="stable")
    xs = xv[order]
    if xs[0] == xs[-1]:
        return None
    ys = yv[order]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    cum = np.cumsum(onehot, axis=0)
    left = cum[:-1]
    total = cum[-1]
    right = total - left
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    score = (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / n_right
    valid = xs[1:] != xs[:-1]
    score = np.where(valid, score, -np.inf)
    pos = int(np.argmax(score))
    return float(score[pos]), 0.5 * (xs[pos] + xs[pos + 1])


def _grow(
    values: np.ndarray,
    labels: np.ndarray,
    rows: np.ndarray,
    depth: int,
    rng: np.random.Generator,
    cfg: ForestConfig,
    n_classes: int,
) -> TreeNode:
    counts = np.bincount(labels[rows], minlength=n_classes).astype(float)
    if (
        depth >= cfg.max_depth
        or rows.shape[0] < cfg.min_samples_split
        or counts.max() == rows.shape[0]
    ):
        return TreeNode(counts=counts)
    n_features = values.shape[1]
    m = cfg.n_split_features(n_features)
    if m >= n_features:
        feats = np.arange(n_features)
    else:
        feats = rng.choice(n_features, size=m, replace=False)
    best_score = -np.inf
    best_feature = -1
    best_threshold = 0.0
    node_labels = labels[rows]
    for f in feats.tolist():
        candidate = _best_split_for_feature(values[rows, f], node_labels, n_classes)
        if candidate is not None and candidate[0] > best_score:
            best_score, best_threshold = candidate
            best_feature = f
    if best_feature < 0:
        return TreeNode(counts=counts)
    go_left = values[rows, best_feature] <= best_threshold
    node = TreeNode(feature=best_feature, threshold=best_threshold)
    node.left = _grow(values, labels, rows[go_left], depth + 1, rng, cfg, n_classes)
    node.right = _grow(values, labels, rows[~go_left], depth + 1, rng, cfg, n_classes)
    return node


def forest_train(
    x: FeatureTable, y: LabelVector, cfg: ForestConfig, n_classes: int | None = None
) -> ForestModel:
    """Grow cfg.n_trees bootstrap trees; raw (unstandardized) features are fine."""
    if x.segment_ids != y.segment_ids:
        raise DataError("features and labels must be aligned before forest training")
    n = x.n_segments
    if n == 0:
        raise DataError("cannot train a forest on an empty table")
    labels = y.labels
    k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    seed = int(cfg.seed) & _SEED_MASK
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng([seed, t])
        bootstrap = rng.integers(0, n, size=n)
        trees.append(_grow(x.values, labels, bootstrap, 0, rng, cfg, k))
    return ForestModel(tuple(trees), k, x.n_features, cfg)


def _tree_distributions(tree: TreeNode, values: np.ndarray) -> np.ndarray:
    """Per-row leaf class frequencies, routed by boolean masks."""
    n = values.shape[0]
    out = np.zeros((n, _leaf_width(tree)))

    def route(node: TreeNode, rows: np.ndarray) -> None:
        if node.is_leaf:
            out[rows] = node.counts / node.counts.sum()
            return
        go_left = values[rows, node.feature] <= node.threshold
        route(node.left, rows[go_left])
        route(node.right, rows[~go_left])

    route(tree, np.arange(n))
    return out


def _leaf_width(tree: TreeNode) -> int:
    node = tree
    while not node.is_leaf:
        node = node.left
    return node.counts.shape[0]


def _check_width(model: ForestModel, t: FeatureTable) -> None:
    if t.n_features != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, table has {t.n_features}"
        )


def forest_predict(model: ForestModel, t: FeatureTable) -> LabelVector:
    """Plurality vote of per-tree leaf majorities; ties to the lowest index."""
    _check_width(model, t)
    votes = np.zeros((t.n_segments, model.n_classes))
    for tree in model.trees:
        dist = _tree_distributions(tree, t.values)
        votes[np.arange(t.n_segments), dist.argmax(axis=1)] += 1.0
    return LabelVector(t.segment_ids, votes.argmax(axis=1).astype(np.int64))


def forest_scores(model: ForestModel, t: FeatureTable, vocab: ClassVocabulary) -> ProbabilityMatrix:
    """Average the per-tree leaf class-frequency distributions."""
    if vocab.size != model.n_classes:
        raise DataError(
            f"model trained for {model.n_classes} classes, vocabulary has {vocab.size}"
        )
    _check_width(model, t)
    total = np.zeros((t.n_segments, model.n_classes))
    for tree in model.trees:
        total += _tree_distributions(tree, t.values)
    return ProbabilityMatrix(t.segment_ids, vocab, total / len(model.trees))


def tree_depth(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))
