import numpy as np
import pytest

from segclf.errors import DataError, ValidationError
from segclf.forest import (
    ForestConfig,
    ForestModel,
    TreeNode,
    forest_predict,
    forest_scores,
    forest_train,
    tree_depth,
)
from segclf.persistence import _tree_to_dict

from conftest import make_labels, make_table


def leaf(*counts):
    return TreeNode(counts=np.array(counts, dtype=float))


class TestConfig:
    def test_defaults(self):
        cfg = ForestConfig()
        assert cfg.n_trees == 100
        assert cfg.max_depth == 7
        assert cfg.min_samples_split == 2
        assert cfg.features_per_split == "sqrt"

    def test_raw_depth_must_floor(self):
        ForestConfig(max_depth=7, max_depth_raw=7.4008)
        with pytest.raises(ValidationError):
            ForestConfig(max_depth=8, max_depth_raw=7.4008)

    def test_split_feature_counts(self):
        assert ForestConfig().n_split_features(20) == 4
        assert ForestConfig(features_per_split="all").n_split_features(20) == 20
        assert ForestConfig(features_per_split=3).n_split_features(20) == 3
        assert ForestConfig(features_per_split=50).n_split_features(20) == 20

    def test_validation(self):
        with pytest.raises(ValidationError):
            ForestConfig(n_trees=0)
        with pytest.raises(ValidationError):
            ForestConfig(max_depth=0)
        with pytest.raises(ValidationError):
            ForestConfig(min_samples_split=1)
        with pytest.raises(ValidationError):
            ForestConfig(features_per_split="half")


class TestTraining:
    def test_single_class_data_is_pure(self):
        rng = np.random.default_rng(0)
        x = make_table(rng.normal(0, 1, (20, 3)))
        y = make_labels([0] * 20)
        model = forest_train(x, y, ForestConfig(n_trees=10), n_classes=2)
        preds = forest_predict(model, x)
        assert (preds.labels == 0).all()
        for tree in model.trees:
            assert tree.is_leaf
            assert tree.counts.tolist() == [20.0, 0.0]

    def test_threshold_rule_learned_at_depth_one(self):
        # x < 0 -> class 0, x >= 0 -> class 1, clear margin around 0
        values = np.concatenate([np.linspace(-2, -0.5, 12), np.linspace(0.5, 2, 12)])
        labels = np.array([0] * 12 + [1] * 12)
        x = make_table(values[:, None])
        y = make_labels(labels)
        cfg = ForestConfig(n_trees=20, features_per_split="all", seed=3)
        model = forest_train(x, y, cfg)
        assert all(tree_depth(t) == 1 for t in model.trees)
        preds = forest_predict(model, x)
        assert (preds.labels == labels).all()

    def test_depth_two_rule_learned_exactly(self):
        rng = np.random.default_rng(1)
        values = rng.uniform(0.5, 2.0, size=(60, 2)) * rng.choice([-1, 1], size=(60, 2))
        labels = np.where(values[:, 0] <= 0, 0, np.where(values[:, 1] <= 0, 1, 2))
        x = make_table(values)
        y = make_labels(labels)
        model = forest_train(x, y, ForestConfig(n_trees=30, features_per_split="all", seed=9))
        preds = forest_predict(model, x)
        assert (preds.labels == labels).mean() == 1.0

    def test_same_seed_bit_identical_trees(self):
        rng = np.random.default_rng(2)
        x = make_table(rng.normal(0, 1, (40, 5)))
        y = make_labels(rng.integers(0, 3, 40))
        cfg = ForestConfig(n_trees=8, seed=11)
        a = forest_train(x, y, cfg, n_classes=3)
        b = forest_train(x, y, cfg, n_classes=3)
        assert [_tree_to_dict(t) for t in a.trees] == [_tree_to_dict(t) for t in b.trees]

    def test_depth_limit_respected(self):
        rng = np.random.default_rng(4)
        x = make_table(rng.normal(0, 1, (200, 4)))
        y = make_labels(rng.integers(0, 3, 200))
        model = forest_train(x, y, ForestConfig(n_trees=10, max_depth=3), n_classes=3)
        assert max(tree_depth(t) for t in model.trees) <= 3

    def test_leaf_counts_never_all_zero(self):
        rng = np.random.default_rng(5)
        x = make_table(rng.normal(0, 1, (50, 3)))
        y = make_labels(rng.integers(0, 2, 50))

        def walk(node):
            if node.is_leaf:
                assert node.counts.min() >= 0
                assert node.counts.sum() > 0
            else:
                walk(node.left)
                walk(node.right)

        model = forest_train(x, y, ForestConfig(n_trees=6), n_classes=2)
        for tree in model.trees:
            walk(tree)

    def test_empty_input_error(self):
        x = make_table(np.zeros((0, 2)))
        y = make_labels([])
        with pytest.raises(DataError):
            forest_train(x, y, ForestConfig(n_trees=2))

    def test_unaligned_error(self):
        x = make_table(np.zeros((2, 1)))
        y = make_labels([0, 1], ids=("a", "b"))
        with pytest.raises(DataError):
            forest_train(x, y, ForestConfig())

    def test_permutation_invariant_on_separable_data(self):
        rng = np.random.default_rng(6)
        centers = np.array([[-4.0], [4.0]])
        labels = np.array([0, 1] * 15)
        values = centers[labels] + rng.normal(0, 0.3, (30, 1))
        # queries live inside the blobs so every bootstrap tree agrees
        query_labels = np.array([0, 1] * 12 + [0])
        queries = make_table(
            centers[query_labels] + rng.normal(0, 0.3, (25, 1)),
            ids=[f"q{i}" for i in range(25)],
        )
        expected = query_labels
        for _ in range(3):
            perm = rng.permutation(30)
            x = make_table(values[perm], ids=tuple(f"s{i}" for i in perm))
            y = make_labels(labels[perm], ids=tuple(f"s{i}" for i in perm))
            model = forest_train(x, y, ForestConfig(n_trees=15, seed=1), n_classes=2)
            assert (forest_predict(model, queries).labels == expected).all()


class TestPrediction:
    def test_single_pure_tree(self):
        model = ForestModel((leaf(0, 5),), n_classes=2, n_features=1)
        preds = forest_predict(model, make_table([[0.0]]))
        assert preds.labels.tolist() == [1]

    def test_tree_vote_tie_goes_to_lowest_class(self):
        model = ForestModel((leaf(0, 7), leaf(3, 0)), n_classes=2, n_features=1)
        preds = forest_predict(model, make_table([[0.0]]))
        assert preds.labels.tolist() == [0]

    def test_leaf_majority_tie_goes_to_lowest_class(self):
        model = ForestModel((leaf(2, 2),), n_classes=2, n_features=1)
        preds = forest_predict(model, make_table([[0.0]]))
        assert preds.labels.tolist() == [0]

    def test_scores_rows_sum_to_one(self, vocab3):
        rng = np.random.default_rng(7)
        x = make_table(rng.normal(0, 1, (60, 4)))
        y = make_labels(rng.integers(0, 3, 60))
        model = forest_train(x, y, ForestConfig(n_trees=12), n_classes=3)
        queries = make_table(rng.normal(0, 1, (30, 4)), ids=[f"q{i}" for i in range(30)])
        scores = forest_scores(model, queries, vocab3)
        assert np.abs(scores.probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_scores_average_tree_distributions(self, vocab2):
        model = ForestModel((leaf(1, 3), leaf(1, 0)), n_classes=2, n_features=1)
        scores = forest_scores(model, make_table([[0.0]]), vocab2)
        assert np.allclose(scores.probs[0], [(0.25 + 1.0) / 2, (0.75 + 0.0) / 2])

    def test_dimension_mismatch(self):
        model = ForestModel((leaf(1, 1),), n_classes=2, n_features=3)
        with pytest.raises(DataError):
            forest_predict(model, make_table([[0.0]]))

    def test_empty_table_predictions_and_scores(self, vocab2):
        from segclf.dataset import FeatureTable

        model = ForestModel((leaf(1, 1),), n_classes=2, n_features=1)
        empty = FeatureTable((), ("f0",), np.zeros((0, 1)))
        assert forest_predict(model, empty).n_segments == 0
        assert forest_scores(model, empty, vocab2).n_segments == 0

    def test_vocab_size_mismatch_rejected(self, vocab3):
        model = ForestModel((leaf(1, 1),), n_classes=2, n_features=1)
        with pytest.raises(DataError):
            forest_scores(model, make_table([[0.0]]), vocab3)

    def test_routing_uses_thresholds(self):
        tree = TreeNode(feature=0, threshold=0.5, left=leaf(4, 0), right=leaf(0, 4))
        model = ForestModel((tree,), n_classes=2, n_features=1)
        preds = forest_predict(model, make_table([[0.4], [0.5], [0.6]]))
        assert preds.labels.tolist() == [0, 0, 1]
