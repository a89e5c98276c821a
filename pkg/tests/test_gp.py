import numpy as np
import pytest

from common import ConfigError, NumericalError, ShapeError
from packages.baselines.gp import (GpCellRegressor, GpKernelConfig, GpModel, _log_marginal_likelihood, encode_cell,
                                   encode_cells, gp_fit, gp_predict, kernel_eval)
from packages.evaluation.metrics import r2
from packages.tensor.core import ObservationSet, Shape, all_cells

KINDS = ("categorical", "ordinal", "categorical")
SHAPE = Shape((5, 27, 2))


def _smooth_values(cells):
    geometry = np.array([0.2, -0.1, 0.3, 0.0, -0.2])
    prop = np.array([0.0, 0.25])
    t = cells[:, 1] / 26.0
    return geometry[cells[:, 0]] + prop[cells[:, 2]] + np.sin(1.5 * t) + 0.3 * t ** 2


def test_encoding_one_hot_and_scaled_ordinal():
    np.testing.assert_allclose(encode_cell((2, 13, 1), SHAPE, KINDS),
                               [0, 0, 1, 0, 0, 0.5, 0, 1])
    assert encode_cells(all_cells(SHAPE), SHAPE, KINDS).shape == (270, 8)
    with pytest.raises(ShapeError):
        encode_cells([[0, 0, 0]], SHAPE, KINDS[:2])


def test_kernel_eval_white_noise_only_on_same_point():
    cfg = GpKernelConfig(constant_value=2.0, rbf_lengthscale=1.0, white_noise=0.1)
    assert kernel_eval([0.0, 0.0], [0.0, 0.0], cfg) == pytest.approx(2.0)
    assert kernel_eval([0.0, 0.0], [0.0, 0.0], cfg, same_point=True) == pytest.approx(2.1)
    assert kernel_eval([0.0], [1.0], cfg) == pytest.approx(2.0 * np.exp(-0.5))


@pytest.mark.parametrize("bad", [
    {"constant_value": 0.0}, {"rbf_lengthscale": -1.0}, {"white_noise": -1e-3}, {"alpha": -0.1},
])
def test_kernel_config_validation(bad):
    with pytest.raises(ConfigError):
        GpKernelConfig(**bad)


def test_gp_interpolates_training_points():
    x = np.linspace(0, 1, 8)[:, None]
    y = np.sin(3 * x[:, 0])
    model = gp_fit(x, y, GpKernelConfig(rbf_lengthscale=0.3, white_noise=0.0, alpha=1e-6))
    mean, var = gp_predict(model, x)
    np.testing.assert_allclose(mean, y, atol=1e-3)
    assert np.all(var < 1e-3)


def test_gp_held_out_r2_on_smooth_design_function():
    cells = all_cells(SHAPE)
    rng = np.random.default_rng(0)
    train_rows = rng.choice(len(cells), 50, replace=False)
    test_rows = np.setdiff1d(np.arange(len(cells)), train_rows)
    y = _smooth_values(cells)
    features = encode_cells(cells, SHAPE, KINDS)
    model = gp_fit(features[train_rows], y[train_rows], GpKernelConfig(alpha=0.01))
    mean, var = gp_predict(model, features[test_rows])
    assert r2(y[test_rows], mean) >= 0.9
    assert np.all(var >= 0)
    assert np.all(var <= model.config.constant_value + 1e-12)


def test_empty_query_and_width_mismatch():
    model = gp_fit([[0.0], [1.0]], [0.0, 1.0])
    mean, var = gp_predict(model, np.zeros((0, 1)))
    assert mean.size == 0 and var.size == 0
    with pytest.raises(ShapeError):
        gp_predict(model, [[0.0, 1.0]])
    with pytest.raises(ShapeError):
        gp_fit([[0.0]], [])


def test_singular_gram_matrix_raises_numerical_error():
    with pytest.raises(NumericalError, match="alpha"):
        gp_fit([[0.0], [0.0]], [1.0, 2.0], GpKernelConfig(white_noise=0.0, alpha=0.0))


def test_hyperparameter_optimization_stays_in_bounds_and_improves_likelihood():
    x = np.linspace(0, 1, 20)[:, None]
    y = np.sin(6 * x[:, 0])
    start = GpKernelConfig()
    optimized = gp_fit(x, y, GpKernelConfig(optimize_hyperparams=True)).config
    for value, (low, high) in ((optimized.constant_value, (1e-3, 1e3)), (optimized.rbf_lengthscale, (1e-2, 1e2)),
                               (optimized.white_noise, (1e-5, 1e1))):
        assert low * (1 - 1e-9) <= value <= high * (1 + 1e-9)
    centered = y - y.mean()
    assert _log_marginal_likelihood(x, centered, optimized) >= _log_marginal_likelihood(x, centered, start) - 1e-9


def test_model_dict_restores_predictions():
    x = np.random.default_rng(2).uniform(size=(15, 3))
    y = x.sum(axis=1)
    model = gp_fit(x, y)
    restored = GpModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(gp_predict(restored, x)[0], gp_predict(model, x)[0])


def test_cell_regressor_round_trip():
    cells = all_cells(SHAPE)[::5]
    obs = ObservationSet(SHAPE, cells, _smooth_values(cells))
    regressor = GpCellRegressor.fit(obs, KINDS)
    restored = GpCellRegressor.from_dict(regressor.to_dict())
    query = all_cells(SHAPE)
    np.testing.assert_array_equal(restored.predict_many(query), regressor.predict_many(query))


def test_single_training_point_is_recovered():
    model = gp_fit([[0.5, 1.0]], [7.0])
    mean, var = gp_predict(model, [[0.5, 1.0]])
    assert mean[0] == pytest.approx(7.0, abs=0.05)
    assert var[0] < 0.02


def test_duplicate_rows_average_their_targets():
    model = gp_fit([[0.2], [0.2], [0.9]], [0.0, 2.0, 1.0])
    mean, _ = gp_predict(model, [[0.2]])
    assert mean[0] == pytest.approx(1.0, abs=1e-6)


def test_far_query_falls_back_to_prior():
    model = gp_fit([[0.0], [0.1]], [1.0, 3.0])
    mean, var = gp_predict(model, [[100.0]])
    assert mean[0] == pytest.approx(2.0)
    assert var[0] == pytest.approx(model.config.constant_value)
