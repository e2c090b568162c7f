"""Depth-limited CART trees and random forests used as rule generators.

Splits minimize weighted Gini impurity.  Numeric features split at midpoints
between consecutive distinct sorted values (`<=` goes left), categorical
features split on equality with a single category code (`==` goes left).
Ties in impurity keep the lowest feature index, then the lowest threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._kernels import KIND_CATEGORICAL, KIND_NUMERIC, best_split
from .data import CATEGORICAL, NUMERIC, Dataset
from .rng import TAG_TREE, derived_rng


@dataclass(frozen=True)
class Leaf:
    predicted_class: int
    class_counts: tuple[int, int]  # (negatives, positives)

    @property
    def positive_fraction(self) -> float:
        n0, n1 = self.class_counts
        return n1 / (n0 + n1)


@dataclass(frozen=True)
class Split:
    feature: int
    kind: str  # data.NUMERIC -> "<= value" goes left; data.CATEGORICAL -> "== value" goes left
    value: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Split, Leaf]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 3
    feature_subset_size: "int | None" = None  # None -> ceil(sqrt(D))
    min_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass(frozen=True)
class Forest:
    trees: tuple[TreeNode, ...]
    n_features: int
    max_depth: int
    feature_subset_size: int
    min_leaf: int
    bootstrap: bool
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _kind_codes(dataset: Dataset) -> np.ndarray:
    return np.array(
        [KIND_CATEGORICAL if k == CATEGORICAL else KIND_NUMERIC for k in dataset.kinds],
        dtype=np.int8,
    )


def _leaf(y: np.ndarray) -> Leaf:
    n1 = int(y.sum())
    n0 = y.shape[0] - n1
    return Leaf(predicted_class=1 if n1 > n0 else 0, class_counts=(n0, n1))


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    kinds: np.ndarray,
    depth: int,
    max_depth: int,
    subset: int,
    min_leaf: int,
    rng: np.random.Generator,
) -> TreeNode:
    n = y.shape[0]
    n1 = int(y.sum())
    if depth >= max_depth or n1 == 0 or n1 == n or n < 2 * min_leaf:
        return _leaf(y)

    d = X.shape[1]
    if subset >= d:
        feats = np.arange(d)
    else:
        feats = np.sort(rng.choice(d, size=subset, replace=False))

    found, local_j, value = best_split(
        np.ascontiguousarray(X[:, feats]), y, kinds[feats], min_leaf
    )
    if not found:
        return _leaf(y)

    feature = int(feats[local_j])
    if kinds[feature] == KIND_CATEGORICAL:
        mask = X[:, feature] == value
        kind = CATEGORICAL
    else:
        mask = X[:, feature] <= value
        kind = NUMERIC

    left = _grow(X[mask], y[mask], kinds, depth + 1, max_depth, subset, min_leaf, rng)
    right = _grow(X[~mask], y[~mask], kinds, depth + 1, max_depth, subset, min_leaf, rng)
    return Split(feature=feature, kind=kind, value=float(value), left=left, right=right)


def fit_tree(
    train: Dataset,
    max_depth: int = 3,
    feature_subset_size: "int | None" = None,
    min_leaf: int = 1,
    rng: "int | np.random.Generator" = 0,
) -> TreeNode:
    """Grow one greedy Gini tree on a dataset.

    `rng` is either a seed (mapped to the same stream a single-tree forest
    would use) or a Generator.  Pure nodes, the depth cap and the `min_leaf`
    floor stop growth; leaves predict the majority class, ties -> class 0.
    """
    if train.n_samples == 0:
        raise ValueError("empty training view")
    if isinstance(rng, (int, np.integer)):
        rng = derived_rng(int(rng), TAG_TREE, 0)
    d = train.n_features
    subset = feature_subset_size if feature_subset_size is not None else math.ceil(math.sqrt(d))
    if not 1 <= subset <= d:
        raise ValueError(f"feature_subset_size must be in [1, {d}]")
    X = train.matrix()
    y = train.labels.astype(np.uint8)
    return _grow(X, y, _kind_codes(train), 0, max_depth, subset, min_leaf, rng)


def fit_forest(train: Dataset, config: ForestConfig) -> Forest:
    """Train `config.n_trees` trees; per-tree streams derive from (seed, index).

    With bootstrap on, each tree sees an N-sample draw with replacement taken
    from its own stream, so results do not depend on training order.
    """
    X = train.matrix()
    y = train.labels.astype(np.uint8)
    kinds = _kind_codes(train)
    n, d = X.shape
    subset = (
        config.feature_subset_size
        if config.feature_subset_size is not None
        else math.ceil(math.sqrt(d))
    )
    if not 1 <= subset <= d:
        raise ValueError(f"feature_subset_size must be in [1, {d}]")

    trees = []
    for t in range(config.n_trees):
        rng = derived_rng(config.seed, TAG_TREE, t)
        if config.bootstrap:
            idx = rng.integers(0, n, size=n)
            Xt, yt = X[idx], y[idx]
        else:
            Xt, yt = X, y
        trees.append(_grow(Xt, yt, kinds, 0, config.max_depth, subset, config.min_leaf, rng))

    return Forest(
        trees=tuple(trees),
        n_features=d,
        max_depth=config.max_depth,
        feature_subset_size=subset,
        min_leaf=config.min_leaf,
        bootstrap=config.bootstrap,
        seed=config.seed,
    )


def tree_positive_fraction(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    """Positive-class fraction of the leaf each row of X reaches."""
    out = np.empty(X.shape[0])
    _route(tree, X, np.arange(X.shape[0]), out)
    return out


def _route(node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[idx] = node.positive_fraction
        return
    col = X[idx, node.feature]
    mask = (col == node.value) if node.kind == CATEGORICAL else (col <= node.value)
    _route(node.left, X, idx[mask], out)
    _route(node.right, X, idx[~mask], out)


def predict_proba(forest: Forest, sample: np.ndarray) -> "float | np.ndarray":
    """Mean over trees of the reached leaf's positive fraction.

    Accepts a single feature vector (returns a float) or an (N, D) matrix.
    """
    X = np.asarray(sample, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} features, got {X.shape[1]}")
    acc = np.zeros(X.shape[0])
    for tree in forest.trees:
        acc += tree_positive_fraction(tree, X)
    probs = acc / forest.n_trees
    return float(probs[0]) if single else probs


def count_leaves(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return count_leaves(node.left) + count_leaves(node.right)


def tree_depth(node: TreeNode) -> int:
    """Longest root-to-leaf path, counted in split nodes."""
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))
