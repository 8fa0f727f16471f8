"""Random forest: bagged CART trees with Gini splits, stored as flat arrays.

Each tree draws its own bootstrap sample and, at every node, considers a
random subset of sqrt(d) features. Tree randomness comes from a stream
seeded by (seed, tree_index), so the forest is reproducible and trees could
be grown in parallel without changing the result.
"""

from __future__ import annotations

import numpy as np

from .base import (
    SCORERS,
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    require_all_classes,
)

_MASK63 = (1 << 63) - 1


def gini_impurity(counts: np.ndarray) -> float:
    """1 - sum of squared class fractions; 0 for a pure or empty node."""
    total = counts.sum()
    if total == 0:
        return 0.0
    fractions = counts / total
    return float(1.0 - np.sum(fractions**2))


class _TreeBuilder:
    def __init__(self, X, y, n_classes, rng, max_depth, min_leaf):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.rng = rng
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_candidates = max(1, int(np.sqrt(X.shape[1])))
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []

    def grow(self, indices: np.ndarray, depth: int) -> int:
        counts = np.bincount(self.y[indices], minlength=self.n_classes).astype(
            np.float64
        )
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(counts)

        if (
            depth >= self.max_depth
            or len(indices) < 2 * self.min_leaf
            or gini_impurity(counts) == 0.0
        ):
            return node
        split = self._best_split(indices)
        if split is None:
            return node
        feat, thr, left_idx, right_idx = split
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = self.grow(left_idx, depth + 1)
        self.right[node] = self.grow(right_idx, depth + 1)
        return node

    def _best_split(self, indices):
        n = len(indices)
        features = self.rng.choice(
            self.X.shape[1], size=self.n_candidates, replace=False
        )
        best = None
        best_score = np.inf
        for feat in features:
            values = self.X[indices, feat]
            distinct = np.unique(values)
            if len(distinct) < 2:
                continue
            for thr in (distinct[:-1] + distinct[1:]) / 2.0:
                goes_left = values <= thr
                n_left = int(goes_left.sum())
                if n_left < self.min_leaf or n - n_left < self.min_leaf:
                    continue
                left_counts = np.bincount(
                    self.y[indices[goes_left]], minlength=self.n_classes
                )
                right_counts = np.bincount(
                    self.y[indices[~goes_left]], minlength=self.n_classes
                )
                score = (
                    n_left * gini_impurity(left_counts)
                    + (n - n_left) * gini_impurity(right_counts)
                ) / n
                if score < best_score - 1e-12:
                    best_score = score
                    best = (int(feat), float(thr), indices[goes_left], indices[~goes_left])
        return best


def fit_forest(data: FeatureMatrix, hp: Hyperparameters, seed: int) -> ClassifierModel:
    require_all_classes(data.class_counts(), data.task)
    n_classes = data.task.n_classes

    feature, threshold, left, right, value = [], [], [], [], []
    offsets = [0]
    for tree_index in range(hp.n_trees):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed & _MASK63, tree_index]))
        )
        bootstrap = rng.integers(0, data.n, size=data.n)
        builder = _TreeBuilder(
            data.X, data.y, n_classes, rng, hp.max_depth, hp.min_leaf
        )
        builder.grow(bootstrap, 0)
        feature.extend(builder.feature)
        threshold.extend(builder.threshold)
        left.extend(builder.left)
        right.extend(builder.right)
        value.extend(builder.value)
        offsets.append(len(feature))

    return ClassifierModel(
        algorithm="random_forest",
        task=data.task,
        hyperparameters=hp,
        seed=seed,
        arrays={
            "feature": np.asarray(feature, dtype=np.int64),
            "threshold": np.asarray(threshold, dtype=np.float64),
            "left": np.asarray(left, dtype=np.int64),
            "right": np.asarray(right, dtype=np.int64),
            "value": np.asarray(value, dtype=np.float64),
            "tree_offsets": np.asarray(offsets, dtype=np.int64),
        },
        training_meta={"dim": data.dim, "n_examples": data.n, "epochs_run": 0,
                       "final_loss": 0.0},
    )


def _tree_vote(model: ClassifierModel, root: int, x: np.ndarray) -> int:
    feature = model.arrays["feature"]
    node = root
    while feature[node] != -1:
        if x[feature[node]] <= model.arrays["threshold"][node]:
            node = root + model.arrays["left"][node]
        else:
            node = root + model.arrays["right"][node]
    counts = model.arrays["value"][node]
    return int(np.argmax(counts))


def _forest_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    offsets = model.arrays["tree_offsets"]
    n_classes = model.task.n_classes
    votes = np.zeros((X.shape[0], n_classes))
    n_trees = len(offsets) - 1
    for t in range(n_trees):
        root = int(offsets[t])
        for i, x in enumerate(X):
            votes[i, _tree_vote(model, root, x)] += 1.0
    return votes / n_trees


SCORERS["random_forest"] = _forest_scores
