"""Probe classifiers for measuring feature quality, plus metrics and grid search.

Four probe families (k-NN, decision tree, random forest, ridge one-vs-rest
linear probe) are implemented from scratch so every tie-breaking rule is
pinned: distance ties go to the lower training index, vote and argmax ties to
the smallest class id, split ties to the lower feature index and then the
lower threshold. That makes every probe bit-deterministic across platforms,
which library implementations do not guarantee.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import FeatureBundle

PROBE_KINDS = ("knn", "tree", "forest", "linear")


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def knn_fit_predict(train: FeatureBundle, test: FeatureBundle, k: int) -> np.ndarray:
    """Majority vote among the k nearest training points (Euclidean).

    Distance ties are broken by the lower training index, vote ties by the
    smallest class id.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if train.n == 0:
        raise ValueError("training bundle is empty")
    if k > train.n:
        raise ValueError(f"k={k} exceeds the {train.n} training samples")
    if train.dim != test.dim:
        raise ValueError("train/test feature dimensions differ")

    distances = cdist(test.features, train.features, metric="sqeuclidean")
    order = np.argsort(distances, axis=1, kind="stable")[:, :k]
    votes = train.labels[order]
    predictions = np.empty(test.n, dtype=np.int64)
    for i in range(test.n):
        counts = np.bincount(votes[i], minlength=train.num_classes)
        predictions[i] = int(counts.argmax())
    return predictions


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float((p * p).sum())


@dataclass
class _Node:
    prediction: int
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class DecisionTree:
    """CART-style classifier with binary axis-aligned Gini splits.

    Candidate thresholds are midpoints between consecutive sorted unique
    feature values; the split maximizing the Gini impurity decrease wins, with
    ties broken by lower feature index and then lower threshold. Leaves
    predict the majority class (smallest id on ties).
    """

    def __init__(
        self,
        max_depth: int | None = None,
        min_leaf: int = 1,
        mtry: int | None = None,
        rng: np.random.Generator | None = None,
    ):
        if min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.rng = rng
        self.root: _Node | None = None
        self.num_classes = 0

    def fit(self, features: np.ndarray, labels: np.ndarray, num_classes: int) -> "DecisionTree":
        if features.shape[0] == 0:
            raise ValueError("cannot fit a tree on an empty set")
        self.num_classes = num_classes
        self.root = self._build(features, labels, depth=0)
        return self

    def _candidate_features(self, total: int) -> np.ndarray:
        if self.mtry is None or self.mtry >= total:
            return np.arange(total)
        chosen = self.rng.choice(total, size=self.mtry, replace=False)
        return np.sort(chosen)

    def _build(self, features: np.ndarray, labels: np.ndarray, depth: int) -> _Node:
        counts = np.bincount(labels, minlength=self.num_classes)
        prediction = int(counts.argmax())
        node = _Node(prediction=prediction)
        n = labels.size
        parent_gini = _gini(counts)
        if parent_gini == 0.0 or n < 2 * self.min_leaf:
            return node
        if self.max_depth is not None and depth >= self.max_depth:
            return node

        best_decrease = 0.0
        best_feature = -1
        best_threshold = 0.0
        for feat in self._candidate_features(features.shape[1]):
            column = features[:, feat]
            order = np.argsort(column, kind="stable")
            sorted_x = column[order]
            sorted_y = labels[order]
            left_counts = np.zeros(self.num_classes)
            right_counts = counts.astype(np.float64).copy()
            for i in range(n - 1):
                cls = sorted_y[i]
                left_counts[cls] += 1.0
                right_counts[cls] -= 1.0
                if sorted_x[i] == sorted_x[i + 1]:
                    continue
                n_left = i + 1
                n_right = n - n_left
                if n_left < self.min_leaf or n_right < self.min_leaf:
                    continue
                decrease = parent_gini - (
                    n_left * _gini(left_counts) + n_right * _gini(right_counts)
                ) / n
                if decrease > best_decrease:
                    best_decrease = decrease
                    best_feature = int(feat)
                    best_threshold = (sorted_x[i] + sorted_x[i + 1]) / 2.0
        if best_feature < 0:
            return node

        mask = features[:, best_feature] <= best_threshold
        node.feature = best_feature
        node.threshold = best_threshold
        node.left = self._build(features[mask], labels[mask], depth + 1)
        node.right = self._build(features[~mask], labels[~mask], depth + 1)
        return node

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.root is None:
            raise RuntimeError("tree is not fitted")
        out = np.empty(features.shape[0], dtype=np.int64)
        for i, row in enumerate(features):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.prediction
        return out


def tree_fit(train: FeatureBundle, max_depth: int | None = None, min_leaf: int = 1) -> DecisionTree:
    return DecisionTree(max_depth=max_depth, min_leaf=min_leaf).fit(
        train.features, train.labels, train.num_classes
    )


class RandomForest:
    """Bagged trees with per-split feature subsampling.

    Tree i draws from a generator seeded ``seed + i`` for its bootstrap sample
    and split-time feature choices; prediction is a majority vote with ties to
    the smallest class id. With one tree, all features, and the bootstrap
    disabled this reduces exactly to ``DecisionTree``.
    """

    def __init__(
        self,
        n_trees: int = 25,
        max_depth: int | None = None,
        mtry: int | None = None,
        seed: int = 0,
        bootstrap: bool = True,
        min_leaf: int = 1,
    ):
        if n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.mtry = mtry
        self.seed = seed
        self.bootstrap = bootstrap
        self.min_leaf = min_leaf
        self.trees: list[DecisionTree] = []
        self.num_classes = 0

    def fit(self, features: np.ndarray, labels: np.ndarray, num_classes: int) -> "RandomForest":
        n, dim = features.shape
        if self.mtry is not None and not 1 <= self.mtry <= dim:
            raise ValueError(f"mtry must be in [1, {dim}], got {self.mtry}")
        self.num_classes = num_classes
        self.trees = []
        for i in range(self.n_trees):
            rng = np.random.default_rng(self.seed + i)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(
                max_depth=self.max_depth, min_leaf=self.min_leaf, mtry=self.mtry, rng=rng
            )
            tree.fit(features[idx], labels[idx], num_classes)
            self.trees.append(tree)
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise RuntimeError("forest is not fitted")
        votes = np.stack([tree.predict(features) for tree in self.trees])
        out = np.empty(features.shape[0], dtype=np.int64)
        for i in range(features.shape[0]):
            counts = np.bincount(votes[:, i], minlength=self.num_classes)
            out[i] = int(counts.argmax())
        return out


def forest_fit(
    train: FeatureBundle,
    n_trees: int = 25,
    max_depth: int | None = None,
    mtry: int | None = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> RandomForest:
    return RandomForest(
        n_trees=n_trees, max_depth=max_depth, mtry=mtry, seed=seed, bootstrap=bootstrap
    ).fit(train.features, train.labels, train.num_classes)


def linear_probe_fit_predict(train: FeatureBundle, test: FeatureBundle, lam: float) -> np.ndarray:
    """One-vs-rest ridge regression probe.

    Solves W = (F^T F + lam I)^{-1} F^T Y for one-hot Y through the thin SVD
    of F (the same factorization discipline the evidence score uses), then
    predicts the argmax class score; exact ties go to the smallest class id.
    """
    if lam <= 0:
        raise ValueError(f"ridge penalty must be positive, got {lam}")
    if train.n == 0:
        raise ValueError("training bundle is empty")
    if train.dim != test.dim:
        raise ValueError("train/test feature dimensions differ")
    y = _one_hot(train.labels, train.num_classes)
    u, s, vt = np.linalg.svd(train.features, full_matrices=False)
    shrink = s / (s**2 + lam)
    weights = vt.T @ (shrink[:, None] * (u.T @ y))
    scores = test.features @ weights
    return scores.argmax(axis=1).astype(np.int64)


def evaluate(
    predicted: np.ndarray, truth: np.ndarray, num_classes: int | None = None
) -> tuple[float, float]:
    """Accuracy and macro-averaged F1.

    Macro F1 averages per-class F1 over all ``num_classes`` classes; a class
    with zero precision and recall (including one absent from both truth and
    predictions) contributes 0.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise ValueError("nothing to evaluate")
    k = num_classes if num_classes is not None else int(max(predicted.max(), truth.max())) + 1

    accuracy = float((predicted == truth).mean())
    f1_values = np.zeros(k)
    for cls in range(k):
        tp = float(((predicted == cls) & (truth == cls)).sum())
        fp = float(((predicted == cls) & (truth != cls)).sum())
        fn = float(((predicted != cls) & (truth == cls)).sum())
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        if precision + recall > 0:
            f1_values[cls] = 2.0 * precision * recall / (precision + recall)
    return accuracy, float(f1_values.mean())


def fit_predict(
    kind: str, params: dict, train: FeatureBundle, test: FeatureBundle, seed: int = 0
) -> np.ndarray:
    """Dispatch one probe configuration; ``params`` are kind-specific."""
    if kind == "knn":
        return knn_fit_predict(train, test, k=int(params["k"]))
    if kind == "linear":
        return linear_probe_fit_predict(train, test, lam=float(params["lam"]))
    if kind == "tree":
        model = tree_fit(train, max_depth=params.get("max_depth"), min_leaf=int(params.get("min_leaf", 1)))
        return model.predict(test.features)
    if kind == "forest":
        model = forest_fit(
            train,
            n_trees=int(params.get("n_trees", 25)),
            max_depth=params.get("max_depth"),
            mtry=params.get("mtry"),
            seed=seed,
        )
        return model.predict(test.features)
    raise ValueError(f"unknown probe kind {kind!r}, expected one of {PROBE_KINDS}")


def default_grid(kind: str, dim: int, n_train: int | None = None) -> dict[str, list]:
    """Hyperparameter grids used when none are supplied.

    ``n_train`` filters k-NN neighbour counts that would exceed the training
    set.
    """
    if kind == "knn":
        ks = [1, 3, 5, 9, 15]
        if n_train is not None:
            ks = [k for k in ks if k <= n_train] or [1]
        return {"k": ks}
    if kind == "tree":
        return {"max_depth": [4, 8, 16, None]}
    if kind == "forest":
        mtry = sorted({max(1, round(math.sqrt(dim))), max(1, dim // 3)})
        return {"n_trees": [25, 100], "mtry": mtry}
    if kind == "linear":
        return {"lam": [1e-4, 1e-2, 1.0, 1e2]}
    raise ValueError(f"unknown probe kind {kind!r}")


@dataclass(frozen=True)
class GridResult:
    params: dict
    val_accuracy: float
    trials: tuple[tuple[tuple, float], ...] = field(repr=False, default=())


def grid_search(
    kind: str,
    grid: dict[str, list],
    train: FeatureBundle,
    val: FeatureBundle,
    seed: int = 0,
) -> GridResult:
    """Exhaustive search over the grid, selecting by validation accuracy.

    Ties keep the earliest configuration in grid order. Validation data never
    enters fitting; each candidate is fit on ``train`` alone.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must provide at least one value per hyperparameter")
    if val.n == 0:
        raise ValueError("validation bundle is empty")
    names = list(grid.keys())
    best: GridResult | None = None
    trials = []
    for combo in itertools.product(*(grid[name] for name in names)):
        params = dict(zip(names, combo))
        predictions = fit_predict(kind, params, train, val, seed=seed)
        accuracy, _ = evaluate(predictions, val.labels, num_classes=val.num_classes)
        trials.append((combo, accuracy))
        if best is None or accuracy > best.val_accuracy:
            best = GridResult(params=params, val_accuracy=accuracy)
    return GridResult(best.params, best.val_accuracy, tuple(trials))
