import numpy as np
import pytest

from common import ConfigError, ShapeError
from packages.ensemble.forest import (Forest, ForestSpec, _best_split, fit_tree, forest_fit, forest_oob_predict,
                                      forest_predict)


def _data(n=60, width=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, width))
    y = x[:, 0] ** 2 + np.sin(x[:, 1]) + 0.1 * x[:, 2]
    return x, y


def test_default_forest_has_100_trees():
    assert ForestSpec().tree_count == 100
    x, y = _data()
    assert len(forest_fit(x, y).trees) == 100


def test_predictions_stay_within_training_target_range():
    x, y = _data()
    forest = forest_fit(x, y, ForestSpec(tree_count=30, seed=3))
    query = np.random.default_rng(9).normal(scale=5.0, size=(200, 4))
    predicted = forest_predict(forest, query)
    assert predicted.min() >= y.min() - 1e-12
    assert predicted.max() <= y.max() + 1e-12


def test_unbootstrapped_full_depth_tree_fits_distinct_rows_exactly():
    x, y = _data(n=40)
    spec = ForestSpec(tree_count=3, bootstrap=False, feature_subsample=0.25)
    forest = forest_fit(x, y, spec)
    np.testing.assert_allclose(forest_predict(forest, x), y, atol=1e-12)


def test_best_split_breaks_ties_toward_lowest_feature_and_threshold():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    feature, threshold = _best_split(x, y, [0, 1], min_leaf=1)
    assert feature == 0
    assert threshold == pytest.approx(1.5)
    y_sym = np.array([0.0, 1.0, 1.0, 0.0])
    _, threshold = _best_split(x, y_sym, [0], min_leaf=1)
    assert threshold == pytest.approx(0.5)


def test_rows_equal_to_threshold_go_left():
    x = np.array([[0.0], [1.0]])
    tree = fit_tree(x, np.array([0.0, 1.0]), ForestSpec(bootstrap=False), np.random.default_rng(0))
    assert tree.predict(np.array([[0.5]]))[0] == 0.0
    assert tree.predict(np.array([[0.50001]]))[0] == 1.0


def test_constant_targets_give_a_single_leaf():
    x, _ = _data(n=10)
    tree = fit_tree(x, np.full(10, 2.5), ForestSpec(), np.random.default_rng(0))
    assert tree.node_count == 1
    np.testing.assert_array_equal(tree.predict(x), np.full(10, 2.5))


def test_max_depth_and_min_leaf_limit_growth():
    x, y = _data(n=50)
    stump = fit_tree(x, y, ForestSpec(max_depth=1, bootstrap=False), np.random.default_rng(0))
    assert stump.node_count == 3
    coarse = fit_tree(x, y, ForestSpec(min_samples_leaf=10, bootstrap=False), np.random.default_rng(0))
    assert len(np.unique(coarse.predict(x))) <= 5


def test_same_seed_same_forest_and_trees_are_independent_streams():
    x, y = _data()
    a = forest_fit(x, y, ForestSpec(tree_count=10, seed=5))
    b = forest_fit(x, y, ForestSpec(tree_count=10, seed=5))
    np.testing.assert_array_equal(forest_predict(a, x), forest_predict(b, x))
    longer = forest_fit(x, y, ForestSpec(tree_count=12, seed=5))
    np.testing.assert_array_equal(a.in_bag, longer.in_bag[:10])


def test_oob_predictions_only_use_trees_that_did_not_see_the_row():
    x, y = _data(n=30)
    forest = forest_fit(x, y, ForestSpec(tree_count=40, seed=1))
    oob = forest_oob_predict(forest, x)
    assert oob.shape == (30,)
    seen_by_all = forest.in_bag.all(axis=0)
    assert np.all(np.isnan(oob[seen_by_all]))
    row = int(np.flatnonzero(~seen_by_all)[0])
    trees = [t for t, bag in zip(forest.trees, forest.in_bag) if not bag[row]]
    assert oob[row] == pytest.approx(np.mean([t.predict(x[row:row + 1])[0] for t in trees]))
    with pytest.raises(ShapeError):
        forest_oob_predict(forest, x[:5])


def test_forest_dict_round_trip():
    x, y = _data()
    forest = forest_fit(x, y, ForestSpec(tree_count=5))
    restored = Forest.from_dict(forest.to_dict())
    np.testing.assert_array_equal(forest_predict(restored, x), forest_predict(forest, x))


@pytest.mark.parametrize("bad", [
    {"tree_count": 0}, {"min_samples_leaf": 0}, {"feature_subsample": 0.0}, {"max_depth": -1},
])
def test_forest_spec_validation(bad):
    with pytest.raises(ConfigError):
        ForestSpec(**bad)


def test_forest_input_validation():
    with pytest.raises(ShapeError):
        forest_fit(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ShapeError):
        forest_fit(np.zeros((3, 2)), np.zeros(2))
    forest = forest_fit(np.arange(6.0).reshape(3, 2), np.arange(3.0), ForestSpec(tree_count=2))
    with pytest.raises(ShapeError):
        forest_predict(forest, np.zeros((1, 3)))
