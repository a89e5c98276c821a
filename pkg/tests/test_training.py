import numpy as np
import pytest

from common import ConfigError, ObservationError, ShapeError, TrainingError
from packages.dataio.synthetic import SyntheticSpec, generate_synthetic
from packages.evaluation.metrics import r2
from packages.models.cpd import CpdModel, SmoothnessSpec
from packages.models.neural import NeuralTcModel
from packages.tensor.core import ObservationSet, all_cells, dense_to_observations, split_observations
from packages.training import AdamState, TrainConfig, adam_step, mae, mae_subgradient, train


def _observe(model, cells):
    return ObservationSet(model.shape, cells, model.predict_many(cells))


def test_mae_examples():
    assert mae([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert mae([0.0, 0.0], [1.0, -3.0]) == 2.0
    with pytest.raises(ValueError):
        mae([], [])
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])


def test_mae_subgradient_uses_sign_zero_at_ties():
    np.testing.assert_array_equal(mae_subgradient([1.0, 1.0, 1.0, 1.0], [2.0, 0.0, 1.0, 5.0]),
                                  [0.25, -0.25, 0.0, 0.25])


def test_adam_first_step_moves_by_learning_rate():
    config = TrainConfig(learning_rate=0.1, weight_decay=0.0)
    params = [np.array([1.0, -2.0, 0.5])]
    grads = [np.array([3.0, -0.01, 0.0])]
    new, state = adam_step(params, grads, AdamState.zeros_like(params), config)
    np.testing.assert_allclose(new[0], [0.9, -1.9, 0.5], atol=1e-6)
    assert state.step_count == 1


def test_adam_weight_decay_respects_mask():
    config = TrainConfig(learning_rate=0.1, weight_decay=1.0)
    params = [np.array([2.0]), np.array([2.0])]
    grads = [np.zeros(1), np.zeros(1)]
    new, _ = adam_step(params, grads, AdamState.zeros_like(params), config, decay_mask=[True, False])
    assert new[0][0] == pytest.approx(1.9, abs=1e-6)
    assert new[1][0] == 2.0


@pytest.mark.parametrize("bad", [
    {"learning_rate": 0.0},
    {"weight_decay": -1.0},
    {"epochs": 0},
    {"adam_beta1": 1.0},
    {"adam_epsilon": 0.0},
])
def test_train_config_validation(bad):
    with pytest.raises(ConfigError):
        TrainConfig(**bad)


def test_train_rejects_empty_and_mismatched_observations():
    model = CpdModel.random((2, 3), 1, np.random.default_rng(0))
    with pytest.raises(ObservationError):
        train(model, ObservationSet.empty((2, 3)), TrainConfig(epochs=1))
    with pytest.raises(ShapeError):
        train(model, ObservationSet.from_entries((3, 3), [((0, 0), 1.0)]), TrainConfig(epochs=1))


def test_smoothness_only_applies_to_cpd():
    model = NeuralTcModel.random((2, 3), 1, np.random.default_rng(0), hidden_sizes=(2,))
    obs = ObservationSet.from_entries((2, 3), [((0, 0), 1.0)])
    config = TrainConfig(epochs=1, smoothness=SmoothnessSpec(frozenset({1})))
    with pytest.raises(ConfigError):
        train(model, obs, config)


def test_divergence_raises_training_error():
    model = CpdModel.random((2, 3), 1, np.random.default_rng(0))
    obs = ObservationSet.from_entries((2, 3), [((0, 0), 1e308), ((1, 1), -1e308)])
    with pytest.raises(TrainingError):
        train(model, obs, TrainConfig(epochs=5))


def test_training_reduces_mae(rank2_truth):
    rng = np.random.default_rng(0)
    cells = all_cells(rank2_truth.shape)
    obs = _observe(rank2_truth, cells[rng.choice(len(cells), 120, replace=False)])
    start = CpdModel.random(rank2_truth.shape, 2, rng)
    trained, trace = train(start, obs, TrainConfig(epochs=600, weight_decay=0.0, seed=0))
    assert trace.epochs_run == 600
    assert len(trace.train_mae) == 600
    assert trace.train_mae[-1] < 0.5 * trace.train_mae[0]
    assert mae(obs.values, trained.predict_many(obs.indices)) <= trace.train_mae[-1] + 1e-2


def test_trace_tail_is_nearly_non_increasing(rank2_truth):
    rng = np.random.default_rng(1)
    cells = all_cells(rank2_truth.shape)
    obs = _observe(rank2_truth, cells[rng.choice(len(cells), 160, replace=False)])
    _, trace = train(CpdModel.random(rank2_truth.shape, 2, rng), obs,
                     TrainConfig(epochs=1000, learning_rate=0.005, weight_decay=0.0))
    tail = trace.train_mae[-100:]
    assert tail[-1] <= tail[0] + 1e-3


def test_early_stopping_stops_on_plateau():
    obs = ObservationSet.from_entries((2, 2), [((0, 0), 0.0), ((1, 1), 0.0)])
    model = CpdModel((2, 2), 1, (np.zeros((2, 1)), np.zeros((2, 1))))
    _, trace = train(model, obs, TrainConfig(epochs=2000, early_stopping=True))
    assert trace.epochs_run < 2000


def test_trace_csv(tmp_path, rank2_truth):
    obs = _observe(rank2_truth, all_cells(rank2_truth.shape)[:40])
    _, trace = train(CpdModel.random(rank2_truth.shape, 1, np.random.default_rng(0)), obs, TrainConfig(epochs=5))
    path = tmp_path / "trace.csv"
    trace.to_csv(str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,train_mae"
    assert len(lines) == 6
    assert lines[1].startswith("1,")


@pytest.fixture(scope="module")
def noiseless_rank2():
    """Synthetic default layout with no noise and constant mass, so E_tilde equals E and the tensor is rank 2."""
    tensor, _ = generate_synthetic(SyntheticSpec(noise_std=0.0, mass_variation=0.0))
    return dense_to_observations(tensor)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_cpd_rank2_recovers_noiseless_synthetic_tensor(noiseless_rank2, seed):
    full = noiseless_rank2
    rng = np.random.default_rng(seed)
    chosen = full.indices[rng.choice(len(full), int(0.6 * len(full)), replace=False)]
    train_obs, test_obs = split_observations(full, chosen)
    model, trace = train(CpdModel.random(full.shape, 2, rng), train_obs, TrainConfig(seed=seed))
    assert trace.epochs_run == 2000
    assert r2(test_obs.values, model.predict_many(test_obs.indices)) >= 0.95


def test_adam_zero_gradient_without_decay_is_identity():
    config = TrainConfig(weight_decay=0.0)
    params = [np.array([1.5, -0.25]), np.array([[3.0]])]
    state = AdamState.zeros_like(params)
    state.step_count = 4
    new, next_state = adam_step(params, [np.zeros(2), np.zeros((1, 1))], state, config)
    for before, after in zip(params, new):
        np.testing.assert_array_equal(after, before)
    assert next_state.step_count == 5


def test_adam_matches_scalar_reference_over_three_steps():
    config = TrainConfig(learning_rate=0.01, weight_decay=0.0)
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_epsilon
    p, m, v = 0.3, 0.0, 0.0
    params, state = [np.array([0.3])], AdamState.zeros_like([np.array([0.3])])
    for t, g in enumerate([1.0, 1.0, -1.0], start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= 0.01 * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        params, state = adam_step(params, [np.array([g])], state, config)
        assert params[0][0] == pytest.approx(p, abs=1e-12)
    assert state.step_count == 3


def test_default_config_fits_rank1_tensor():
    truth = CpdModel((2, 3), 1, (np.array([[1.0], [2.0]]), np.array([[1.0], [2.0], [3.0]])))
    obs = _observe(truth, all_cells(truth.shape))
    model, trace = train(CpdModel.random(truth.shape, 1, np.random.default_rng(0)), obs, TrainConfig())
    assert trace.epochs_run == 2000
    assert mae(obs.values, model.predict_many(obs.indices)) < 1e-2


def test_constant_tensor_is_fit_everywhere():
    cells = all_cells((3, 4))
    obs = ObservationSet((3, 4), cells, np.full(len(cells), 5.0))
    model, _ = train(CpdModel.random((3, 4), 1, np.random.default_rng(3)), obs, TrainConfig())
    np.testing.assert_allclose(model.predict_many(cells), 5.0, atol=0.05)


def test_same_seed_gives_bitwise_identical_parameters(rank2_truth):
    obs = _observe(rank2_truth, all_cells(rank2_truth.shape)[::2])
    runs = [train(CpdModel.random(rank2_truth.shape, 2, np.random.default_rng(9)), obs,
                  TrainConfig(epochs=200, seed=9))[0] for _ in range(2)]
    for first, second in zip(runs[0].parameters(), runs[1].parameters()):
        np.testing.assert_array_equal(first, second)
