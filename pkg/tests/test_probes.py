"""Probe classifiers: exact tie rules, oracle agreement, metrics, grid search."""

import numpy as np
import pytest

from motordiag.dataio import FeatureBundle
from motordiag.probes import (
    DecisionTree,
    RandomForest,
    default_grid,
    evaluate,
    fit_predict,
    forest_fit,
    grid_search,
    knn_fit_predict,
    linear_probe_fit_predict,
    tree_fit,
)


def bundle(features, labels, num_classes):
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    return FeatureBundle(features, np.asarray(labels), num_classes, "t", bytes(32))


def gaussian_blobs(rng, n_per=100, classes=2, dim=4, spread=0.5, distance=4.0):
    centers = np.zeros((classes, dim))
    for c in range(classes):
        centers[c, 0] = c * distance
    labels = np.repeat(np.arange(classes), n_per)
    feats = centers[labels] + spread * rng.normal(size=(labels.size, dim))
    return bundle(feats, labels, classes)


class TestKnn:
    def test_memorizes_training_point(self):
        train = bundle([[0.0], [1.0], [2.0]], [0, 1, 2], 3)
        test = bundle([[1.0]], [0], 3)
        assert knn_fit_predict(train, test, k=1)[0] == 1

    def test_equidistant_vote_tie_goes_to_smaller_class(self):
        train = bundle([[0.0], [1.0]], [1, 0], 2)
        test = bundle([[0.5]], [0], 2)
        # Both neighbours are at distance 0.5; the vote is 1-1 and the
        # smaller class id must win.
        assert knn_fit_predict(train, test, k=2)[0] == 0

    def test_distance_tie_goes_to_lower_training_index(self):
        train = bundle([[0.0], [2.0], [2.0]], [0, 1, 2], 3)
        test = bundle([[2.0]], [0], 3)
        # Index 1 and 2 are both at distance zero; with k=1 the lower
        # training index (label 1) must be chosen.
        assert knn_fit_predict(train, test, k=1)[0] == 1

    def test_blobs_match_bruteforce_oracle(self):
        rng = np.random.default_rng(0)
        train = gaussian_blobs(rng)
        test = gaussian_blobs(rng, n_per=50)
        predictions = knn_fit_predict(train, test, k=5)

        # Brute-force oracle: full pairwise distances via explicit loops.
        oracle = np.empty(test.n, dtype=int)
        for i, point in enumerate(test.features):
            distances = np.array([float(((point - q) ** 2).sum()) for q in train.features])
            nearest = np.argsort(distances, kind="stable")[:5]
            counts = np.bincount(train.labels[nearest], minlength=2)
            oracle[i] = counts.argmax()
        np.testing.assert_array_equal(predictions, oracle)
        assert evaluate(predictions, test.labels)[0] > 0.95

    def test_k_larger_than_train_rejected(self):
        train = bundle([[0.0], [1.0]], [0, 1], 2)
        with pytest.raises(ValueError, match="exceeds"):
            knn_fit_predict(train, train, k=3)


class TestDecisionTree:
    def test_pure_training_set_is_single_leaf(self):
        train = bundle([[0.0], [1.0], [2.0]], [1, 1, 1], 2)
        model = tree_fit(train)
        assert model.root.is_leaf
        assert model.predict(np.array([[5.0]]))[0] == 1

    def test_unique_split_at_one_point_five(self):
        train = bundle([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1], 2)
        model = tree_fit(train)
        assert model.root.feature == 0
        assert model.root.threshold == pytest.approx(1.5)
        assert model.root.left.is_leaf and model.root.right.is_leaf

    def test_memorizes_distinct_rows_at_unbounded_depth(self):
        rng = np.random.default_rng(1)
        feats = rng.normal(size=(32, 3))
        labels = rng.integers(0, 4, size=32)
        train = bundle(feats, labels, 4)
        model = tree_fit(train, max_depth=None)
        assert evaluate(model.predict(feats), labels)[0] == 1.0

    def test_every_split_strictly_decreases_weighted_impurity(self):
        # A single child's impurity may exceed its parent's, but the
        # size-weighted impurity must drop at every accepted split.
        rng = np.random.default_rng(2)
        train = gaussian_blobs(rng, n_per=60, classes=3, distance=2.0)
        model = tree_fit(train, max_depth=6)

        def gini_of(labels):
            counts = np.bincount(labels, minlength=3)
            p = counts / counts.sum()
            return 1.0 - float((p * p).sum())

        def walk(node, feats, labels):
            if node.is_leaf:
                return
            mask = feats[:, node.feature] <= node.threshold
            weighted = (
                mask.sum() * gini_of(labels[mask]) + (~mask).sum() * gini_of(labels[~mask])
            ) / labels.size
            assert weighted < gini_of(labels)
            walk(node.left, feats[mask], labels[mask])
            walk(node.right, feats[~mask], labels[~mask])

        walk(model.root, train.features, train.labels)


class TestRandomForest:
    def test_single_tree_no_bootstrap_reduces_to_tree(self):
        rng = np.random.default_rng(3)
        train = gaussian_blobs(rng, n_per=40, classes=3, distance=2.5)
        test = gaussian_blobs(rng, n_per=20, classes=3, distance=2.5)
        forest = RandomForest(n_trees=1, mtry=train.dim, seed=9, bootstrap=False)
        forest.fit(train.features, train.labels, 3)
        tree = tree_fit(train)
        np.testing.assert_array_equal(forest.predict(test.features), tree.predict(test.features))

    def test_same_seed_identical_predictions(self):
        rng = np.random.default_rng(4)
        train = gaussian_blobs(rng, n_per=30)
        test = gaussian_blobs(rng, n_per=15)
        a = forest_fit(train, n_trees=10, mtry=2, seed=5).predict(test.features)
        b = forest_fit(train, n_trees=10, mtry=2, seed=5).predict(test.features)
        np.testing.assert_array_equal(a, b)

    def test_forest_not_much_worse_than_single_tree_on_blobs(self):
        # Paired runs over 10 seeds; the ensemble may lose at most 0.02
        # accuracy to its single-tree baseline.
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            train = gaussian_blobs(rng, n_per=60, classes=2)
            test = gaussian_blobs(rng, n_per=60, classes=2)
            tree_acc = evaluate(tree_fit(train).predict(test.features), test.labels)[0]
            forest_acc = evaluate(
                forest_fit(train, n_trees=25, seed=seed).predict(test.features), test.labels
            )[0]
            assert forest_acc >= tree_acc - 0.02

    def test_mtry_bounds_checked(self):
        rng = np.random.default_rng(5)
        train = gaussian_blobs(rng, n_per=10)
        with pytest.raises(ValueError, match="mtry"):
            forest_fit(train, mtry=99)


class TestLinearProbe:
    def test_identity_features_memorized(self):
        labels = np.array([0, 1, 2, 0, 1, 2])
        feats = np.eye(3)[labels]
        train = bundle(feats, labels, 3)
        predictions = linear_probe_fit_predict(train, train, lam=1e-6)
        np.testing.assert_array_equal(predictions, labels)

    def test_huge_ridge_shrinks_scores_to_zero(self):
        rng = np.random.default_rng(6)
        train = gaussian_blobs(rng, n_per=20, classes=3, distance=2.0)
        u, s, vt = np.linalg.svd(train.features, full_matrices=False)
        y = np.zeros((train.n, 3))
        y[np.arange(train.n), train.labels] = 1.0
        weights = vt.T @ ((s / (s**2 + 1e12))[:, None] * (u.T @ y))
        scores = train.features @ weights
        assert np.abs(scores).max() < 1e-6

    def test_exactly_tied_scores_pick_smallest_class(self):
        rng = np.random.default_rng(7)
        train = gaussian_blobs(rng, n_per=10, classes=3, distance=2.0)
        zero_test = bundle(np.zeros((4, train.dim)), np.zeros(4, dtype=int), 3)
        predictions = linear_probe_fit_predict(train, zero_test, lam=1.0)
        np.testing.assert_array_equal(predictions, np.zeros(4, dtype=int))

    def test_matches_dense_normal_equations_oracle(self):
        rng = np.random.default_rng(8)
        train = gaussian_blobs(rng, n_per=40, classes=3, distance=3.0)
        test = gaussian_blobs(rng, n_per=25, classes=3, distance=3.0)
        lam = 0.1
        predictions = linear_probe_fit_predict(train, test, lam)

        y = np.zeros((train.n, 3))
        y[np.arange(train.n), train.labels] = 1.0
        gram = train.features.T @ train.features + lam * np.eye(train.dim)
        weights = np.linalg.solve(gram, train.features.T @ y)
        oracle = (test.features @ weights).argmax(axis=1)
        np.testing.assert_array_equal(predictions, oracle)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(9)
        train = gaussian_blobs(rng, n_per=30)
        test = gaussian_blobs(rng, n_per=30)
        q, _ = np.linalg.qr(rng.normal(size=(train.dim, train.dim)))
        rotated_train = bundle(train.features @ q, train.labels, 2)
        rotated_test = bundle(test.features @ q, test.labels, 2)
        np.testing.assert_array_equal(
            linear_probe_fit_predict(train, test, 0.5),
            linear_probe_fit_predict(rotated_train, rotated_test, 0.5),
        )

    def test_nonpositive_lambda_rejected(self):
        train = bundle([[1.0]], [0], 1)
        with pytest.raises(ValueError):
            linear_probe_fit_predict(train, train, 0.0)


class TestEvaluate:
    def test_perfect(self):
        assert evaluate(np.array([0, 1, 2]), np.array([0, 1, 2])) == (1.0, 1.0)

    def test_single_class_predictions_closed_form(self):
        predictions = np.zeros(10, dtype=int)
        truth = np.array([0] * 5 + [1] * 5)
        accuracy, macro_f1 = evaluate(predictions, truth)
        assert accuracy == 0.5
        assert macro_f1 == pytest.approx((2.0 / 3.0 + 0.0) / 2.0)

    def test_empty_class_contributes_zero(self):
        predictions = np.array([0, 1])
        truth = np.array([0, 1])
        accuracy, macro_f1 = evaluate(predictions, truth, num_classes=3)
        assert accuracy == 1.0
        assert macro_f1 == pytest.approx(2.0 / 3.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            evaluate(np.array([0]), np.array([0, 1]))

    def test_balanced_accuracy_equals_mean_recall(self):
        rng = np.random.default_rng(10)
        truth = np.repeat(np.arange(4), 25)
        predictions = rng.integers(0, 4, size=100)
        accuracy, _ = evaluate(predictions, truth, num_classes=4)
        recalls = [
            ((predictions == c) & (truth == c)).sum() / 25 for c in range(4)
        ]
        assert accuracy == pytest.approx(np.mean(recalls), abs=1e-12)


class TestGridSearch:
    def test_singleton_grid(self):
        rng = np.random.default_rng(11)
        train = gaussian_blobs(rng, n_per=20)
        val = gaussian_blobs(rng, n_per=10)
        result = grid_search("linear", {"lam": [0.5]}, train, val)
        assert result.params == {"lam": 0.5}

    def test_selects_oracle_best_k(self):
        rng = np.random.default_rng(12)
        train = gaussian_blobs(rng, n_per=50, spread=1.5, distance=2.0)
        val = gaussian_blobs(rng, n_per=50, spread=1.5, distance=2.0)
        grid = {"k": [1, 3, 5, 9, 15]}
        result = grid_search("knn", grid, train, val)
        accuracies = [
            evaluate(knn_fit_predict(train, val, k), val.labels)[0] for k in grid["k"]
        ]
        assert result.params["k"] == grid["k"][int(np.argmax(accuracies))]
        assert result.val_accuracy == max(accuracies)

    def test_repeated_runs_identical(self):
        rng = np.random.default_rng(13)
        train = gaussian_blobs(rng, n_per=30)
        val = gaussian_blobs(rng, n_per=20)
        grid = default_grid("forest", train.dim)
        first = grid_search("forest", grid, train, val, seed=3)
        second = grid_search("forest", grid, train, val, seed=3)
        assert first.params == second.params
        assert first.val_accuracy == second.val_accuracy

    def test_default_grids(self):
        assert default_grid("knn", 10) == {"k": [1, 3, 5, 9, 15]}
        assert default_grid("knn", 10, n_train=4) == {"k": [1, 3]}
        assert default_grid("tree", 10) == {"max_depth": [4, 8, 16, None]}
        assert default_grid("forest", 9) == {"n_trees": [25, 100], "mtry": [3]}
        assert default_grid("linear", 10) == {"lam": [1e-4, 1e-2, 1.0, 1e2]}

    def test_fit_predict_dispatch(self):
        rng = np.random.default_rng(14)
        train = gaussian_blobs(rng, n_per=15)
        test = gaussian_blobs(rng, n_per=5)
        for kind, params in [
            ("knn", {"k": 3}),
            ("linear", {"lam": 0.1}),
            ("tree", {"max_depth": 4}),
            ("forest", {"n_trees": 5, "mtry": 2}),
        ]:
            predictions = fit_predict(kind, params, train, test, seed=0)
            assert predictions.shape == (test.n,)
        with pytest.raises(ValueError, match="unknown probe"):
            fit_predict("svm", {}, train, test)
