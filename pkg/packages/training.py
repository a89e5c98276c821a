"""Masked-completion training: full-batch MAE on observed cells, optimized with Adam.

Any completion model works here if it provides predict_many, gradient,
parameters, with_parameters and decay_mask (CpdModel and NeuralTcModel do).
"""
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from common import ConfigError, ObservationError, ShapeError, TrainingError
from packages.Constants import (DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_WEIGHT_DECAY,
                                EARLY_STOP_RELATIVE_TOL, EARLY_STOP_WINDOW)
from packages.models.cpd import CpdModel, SmoothnessSpec, smoothness_penalty
from packages.tensor.core import ObservationSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    epochs: int = DEFAULT_EPOCHS
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    smoothness: Optional[SmoothnessSpec] = None
    early_stopping: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.weight_decay >= 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("adam_beta1", "adam_beta2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ConfigError(f"{name} must be in [0, 1), got {value}")
        if not self.adam_epsilon > 0:
            raise ConfigError(f"adam_epsilon must be > 0, got {self.adam_epsilon}")
        if int(self.epochs) < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")

    def to_dict(self) -> dict:
        data = asdict(self)
        if self.smoothness is not None:
            data["smoothness"] = {"smooth_modes": sorted(self.smoothness.smooth_modes),
                                  "weight": self.smoothness.weight}
        return data


@dataclass
class AdamState:
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


@dataclass
class TrainTrace:
    train_mae: List[float] = field(default_factory=list)
    epochs_run: int = 0
    wall_seconds: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"epoch": np.arange(1, len(self.train_mae) + 1), "train_mae": self.train_mae})

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _paired(actual, predicted, allow_empty: bool) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if len(a) != len(p):
        raise ValueError(f"length mismatch: {len(a)} actual vs {len(p)} predicted")
    if not allow_empty and len(a) == 0:
        raise ValueError("cannot compute an error over empty lists")
    return a, p


def mae(actual, predicted) -> float:
    """Mean absolute error."""
    a, p = _paired(actual, predicted, allow_empty=False)
    return float(np.mean(np.abs(a - p)))


def mae_subgradient(actual, predicted) -> np.ndarray:
    """d MAE / d predicted, with sign(0) = 0."""
    a, p = _paired(actual, predicted, allow_empty=True)
    if len(a) == 0:
        return np.zeros(0)
    return np.sign(p - a) / len(a)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              config: TrainConfig, decay_mask: Optional[Sequence[bool]] = None
              ) -> Tuple[List[np.ndarray], AdamState]:
    """One Adam update with bias correction; weight decay is added to the gradient (coupled L2).

    Args:
        params: parameter arrays.
        grads: gradients, one per parameter array and of the same shape.
        state: moments and step count from the previous call.
        config: learning rate, betas, epsilon and weight decay.
        decay_mask: per-array flag, False exempts that array from weight decay.

    Returns:
        Tuple of (updated parameters, new AdamState). The inputs are left untouched.
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError(f"{len(params)} parameters, {len(grads)} gradients, "
                         f"{len(state.first_moment)} moment arrays")
    if decay_mask is None:
        decay_mask = [True] * len(params)

    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.step_count + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v, decay in zip(params, grads, state.first_moment, state.second_moment, decay_mask):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"parameter {p.shape} / gradient {g.shape} / moment {m.shape} mismatch")
        if decay and config.weight_decay:
            g = g + config.weight_decay * p
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_params.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)


def _plateaued(history: List[float]) -> bool:
    if len(history) <= EARLY_STOP_WINDOW:
        return False
    before, now = history[-1 - EARLY_STOP_WINDOW], history[-1]
    return abs(before - now) <= EARLY_STOP_RELATIVE_TOL * max(abs(before), np.finfo(float).tiny)


def train(model, train_obs: ObservationSet, config: TrainConfig):
    """Fit a completion model to the observed cells with full-batch Adam on MAE.

    Args:
        model: CpdModel or NeuralTcModel holding the starting parameters.
        train_obs: observed cells over the model's shape.
        config: optimizer settings, epochs and the optional CPD smoothness penalty.

    Returns:
        Tuple of (trained model, TrainTrace with the per-epoch training MAE).

    Raises:
        ObservationError: `train_obs` is empty.
        ShapeError: `train_obs` and the model disagree on shape.
        ConfigError: a smoothness penalty was given for a non-CPD model.
        TrainingError: the loss or the parameters became non-finite.
    """
    if len(train_obs) == 0:
        raise ObservationError("cannot train on an empty observation set")
    if train_obs.shape != model.shape:
        raise ShapeError(f"observations have shape {train_obs.shape.as_list()}, "
                         f"model has {model.shape.as_list()}")
    smoothness = config.smoothness
    if smoothness is not None:
        if not isinstance(model, CpdModel):
            raise ConfigError("a smoothness penalty only applies to CPD models")
        smoothness.validate_for(model.shape)

    indices, targets = train_obs.indices, train_obs.values
    params = model.parameters()
    state = AdamState.zeros_like(params)
    decay_mask = model.decay_mask()
    trace = TrainTrace()
    started = time.perf_counter()

    for epoch in range(1, int(config.epochs) + 1):
        predicted = model.predict_many(indices)
        loss = float(np.mean(np.abs(predicted - targets)))
        grads = model.gradient(indices, mae_subgradient(targets, predicted))
        if smoothness is not None:
            penalty, penalty_grads = smoothness_penalty(model, smoothness)
            loss_total = loss + penalty
            grads = [g + pg for g, pg in zip(grads, penalty_grads)]
        else:
            loss_total = loss
        if not np.isfinite(loss_total):
            raise TrainingError(f"non-finite training loss at epoch {epoch}")
        trace.train_mae.append(loss)

        params, state = adam_step(params, grads, state, config, decay_mask)
        try:
            model = model.with_parameters(params)
        except ShapeError as e:
            raise TrainingError(f"parameters became non-finite at epoch {epoch}") from e

        if epoch % 500 == 0:
            logger.debug("epoch %d/%d train MAE %.6g", epoch, config.epochs, loss)
        if config.early_stopping and _plateaued(trace.train_mae):
            logger.debug("early stop at epoch %d (train MAE plateau)", epoch)
            break

    trace.epochs_run = len(trace.train_mae)
    trace.wall_seconds = time.perf_counter() - started
    return model, trace
