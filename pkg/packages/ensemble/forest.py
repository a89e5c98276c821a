"""CART regression trees and a bootstrapped random forest.

Splits minimize the summed squared error of the two children (variance
reduction). Candidate thresholds are midpoints between consecutive distinct
feature values; rows with value <= threshold go left. Ties keep the lowest
feature index, then the lowest threshold.
"""
import logging
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np

from common import ConfigError, ShapeError, derive_rng
from packages.Constants import FOREST_FEATURE_SUBSAMPLE, FOREST_TREES

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class ForestSpec:
    tree_count: int = FOREST_TREES
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    feature_subsample: float = FOREST_FEATURE_SUBSAMPLE
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.tree_count) < 1:
            raise ConfigError(f"tree_count must be >= 1, got {self.tree_count}")
        if self.max_depth is not None and int(self.max_depth) < 0:
            raise ConfigError(f"max_depth must be >= 0 or null, got {self.max_depth}")
        if int(self.min_samples_leaf) < 1:
            raise ConfigError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if not 0 < self.feature_subsample <= 1:
            raise ConfigError(f"feature_subsample must be in (0, 1], got {self.feature_subsample}")


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def predict(self, features: np.ndarray) -> np.ndarray:
        node = np.zeros(len(features), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = features[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return self.value[node]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionTree":
        return cls(np.asarray(data["feature"], dtype=np.int64),
                   np.asarray(data["threshold"], dtype=np.float64),
                   np.asarray(data["left"], dtype=np.int64),
                   np.asarray(data["right"], dtype=np.int64),
                   np.asarray(data["value"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Forest:
    trees: List[RegressionTree]
    n_features: int
    in_bag: np.ndarray
    spec: ForestSpec

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "spec": asdict(self.spec),
                "in_bag": self.in_bag.astype(int).tolist(),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, data: dict) -> "Forest":
        return cls([RegressionTree.from_dict(t) for t in data["trees"]], int(data["n_features"]),
                   np.asarray(data["in_bag"], dtype=bool), ForestSpec(**data["spec"]))


def _best_split(x: np.ndarray, y: np.ndarray, features: List[int], min_leaf: int):
    """Lowest-SSE (feature, threshold) over the given features, or None."""
    n = len(y)
    best = None
    best_sse = np.inf
    for f in features:
        order = np.argsort(x[:, f], kind="stable")
        xs, ys = x[order, f], y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        n_left = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        sum_l, sq_l = csum[:-1], csq[:-1]
        sum_r, sq_r = csum[-1] - sum_l, csq[-1] - sq_l
        sse = (sq_l - sum_l ** 2 / n_left) + (sq_r - sum_r ** 2 / (n - n_left))
        sse = np.where(valid, sse, np.inf)
        pos = int(np.argmin(sse))
        if sse[pos] < best_sse:
            best_sse = sse[pos]
            best = (f, 0.5 * (xs[pos] + xs[pos + 1]))
    return best


def fit_tree(x: np.ndarray, y: np.ndarray, spec: ForestSpec, rng: np.random.Generator) -> RegressionTree:
    n_features = x.shape[1]
    n_sub = max(1, int(spec.feature_subsample * n_features))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[rows])))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if len(rows) < 2 * spec.min_samples_leaf or np.ptp(y[rows]) == 0:
            continue
        if spec.max_depth is not None and depth >= spec.max_depth:
            continue
        sampled = rng.permutation(n_features)[:n_sub]
        split = _best_split(x[rows], y[rows], sorted(int(f) for f in sampled), spec.min_samples_leaf)
        if split is None:
            rest = sorted(set(range(n_features)) - {int(f) for f in sampled})
            split = _best_split(x[rows], y[rows], rest, spec.min_samples_leaf)
        if split is None:
            continue
        f, thr = split
        goes_left = x[rows, f] <= thr
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return RegressionTree(np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
                          np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                          np.asarray(value, dtype=np.float64))


def forest_fit(features, targets, spec: ForestSpec = ForestSpec()) -> Forest:
    """Fit tree_count trees, tree t drawing its bootstrap and feature subsets from stream (seed, t).

    Args:
        features: (n, d) stack features.
        targets: n target values.
        spec: tree count, depth and leaf limits, feature subsampling, bootstrap and seed.

    Returns:
        Forest with the fitted trees and each tree's in-bag counts.

    Raises:
        ShapeError: no rows, or rows and targets differ in count.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise ShapeError("forest_fit needs at least one sample")
    if len(x) != len(y):
        raise ShapeError(f"{len(x)} feature rows but {len(y)} targets")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ShapeError("forest features and targets must be finite")

    n = len(y)
    trees, in_bag = [], np.zeros((spec.tree_count, n), dtype=bool)
    for t in range(spec.tree_count):
        rng = derive_rng(spec.seed, t)
        if spec.bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n)
        in_bag[t, rows] = True
        trees.append(fit_tree(x[rows], y[rows], spec, rng))
    logger.debug("forest fit: %d trees on %d samples x %d features", spec.tree_count, n, x.shape[1])
    return Forest(trees, x.shape[1], in_bag, spec)


def forest_predict(forest: Forest, features) -> np.ndarray:
    """Mean of the trees' leaf values."""
    x = np.asarray(features, dtype=np.float64)
    if x.size == 0:
        return np.zeros(0)
    x = np.atleast_2d(x)
    if x.shape[1] != forest.n_features:
        raise ShapeError(f"features have width {x.shape[1]}, forest was fit on {forest.n_features}")
    return np.mean([tree.predict(x) for tree in forest.trees], axis=0)


def forest_oob_predict(forest: Forest, features) -> np.ndarray:
    """Out-of-bag prediction for each training row (NaN where every tree saw the row)."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if len(x) != forest.in_bag.shape[1]:
        raise ShapeError(f"OOB prediction needs the {forest.in_bag.shape[1]} training rows, got {len(x)}")
    total = np.zeros(len(x))
    count = np.zeros(len(x))
    for tree, bag in zip(forest.trees, forest.in_bag):
        out = ~bag
        if out.any():
            total[out] += tree.predict(x[out])
            count[out] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)
