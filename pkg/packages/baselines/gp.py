"""Gaussian process regression baseline over encoded design cells.

Kernel: constant * RBF(lengthscale) + white noise, the white term only on the
training Gram diagonal. alpha is added to the diagonal as extra jitter before
the Cholesky factorization. Targets are centered by their training mean.
"""
import logging
from dataclasses import asdict, dataclass, replace
from typing import Sequence, Tuple

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist

from common import ConfigError, NumericalError, ShapeError
from packages.Constants import (GP_ALPHA, GP_CONSTANT_BOUNDS, GP_CONSTANT_VALUE, GP_LENGTHSCALE,
                                GP_LENGTHSCALE_BOUNDS, GP_VARIANCE_CLAMP_TOL, GP_WHITE_NOISE,
                                GP_WHITE_NOISE_BOUNDS)
from packages.tensor.core import Shape, as_shape, check_index, check_indices

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
ORDINAL = "ordinal"


@dataclass(frozen=True)
class GpKernelConfig:
    constant_value: float = GP_CONSTANT_VALUE
    rbf_lengthscale: float = GP_LENGTHSCALE
    white_noise: float = GP_WHITE_NOISE
    alpha: float = GP_ALPHA
    optimize_hyperparams: bool = False

    def __post_init__(self):
        if not self.constant_value > 0:
            raise ConfigError(f"constant_value must be > 0, got {self.constant_value}")
        if not self.rbf_lengthscale > 0:
            raise ConfigError(f"rbf_lengthscale must be > 0, got {self.rbf_lengthscale}")
        if not self.white_noise >= 0:
            raise ConfigError(f"white_noise must be >= 0, got {self.white_noise}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True, eq=False)
class GpModel:
    features: np.ndarray
    targets: np.ndarray
    target_mean: float
    cholesky: np.ndarray
    dual_weights: np.ndarray
    config: GpKernelConfig

    def to_dict(self) -> dict:
        """Training data plus the (possibly optimized) kernel; the factorization is recomputed on load."""
        cfg = asdict(self.config)
        cfg["optimize_hyperparams"] = False
        return {"features": self.features.tolist(), "targets": self.targets.tolist(), "kernel": cfg}

    @classmethod
    def from_dict(cls, data: dict) -> "GpModel":
        return gp_fit(np.asarray(data["features"], dtype=np.float64),
                      np.asarray(data["targets"], dtype=np.float64),
                      GpKernelConfig(**data["kernel"]))


def encode_cell(index, shape, kinds: Sequence[str]) -> np.ndarray:
    """One-hot for categorical modes, min-max scaled position in [0, 1] for ordinal modes."""
    shape = as_shape(shape)
    idx = check_index(shape, index)
    return encode_cells(np.asarray([idx]), shape, kinds)[0]


def encode_cells(indices, shape, kinds: Sequence[str]) -> np.ndarray:
    shape = as_shape(shape)
    indices = check_indices(shape, indices)
    if len(kinds) != shape.ndim:
        raise ShapeError(f"{len(kinds)} mode kinds for a {shape.ndim}-mode shape")
    blocks = []
    for mode, (kind, dim) in enumerate(zip(kinds, shape.dims)):
        column = indices[:, mode]
        if kind == CATEGORICAL:
            blocks.append(np.eye(dim)[column])
        elif kind == ORDINAL:
            scaled = column / (dim - 1) if dim > 1 else np.zeros(len(column))
            blocks.append(scaled[:, None].astype(np.float64))
        else:
            raise ConfigError(f"mode {mode} has unknown kind {kind!r}")
    return np.concatenate(blocks, axis=1) if blocks else np.zeros((len(indices), 0))


def kernel_eval(x, y, cfg: GpKernelConfig, same_point: bool = False) -> float:
    """k(x, y); the white-noise term only counts when x and y are the same training point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"feature dimension mismatch: {x.shape} vs {y.shape}")
    sq = float(np.sum((x - y) ** 2))
    value = cfg.constant_value * np.exp(-sq / (2.0 * cfg.rbf_lengthscale ** 2))
    if same_point:
        value += cfg.white_noise
    return float(value)


def _cross_kernel(a: np.ndarray, b: np.ndarray, cfg: GpKernelConfig) -> np.ndarray:
    sq = cdist(a, b, "sqeuclidean")
    return cfg.constant_value * np.exp(-sq / (2.0 * cfg.rbf_lengthscale ** 2))


def _training_matrix(features: np.ndarray, cfg: GpKernelConfig) -> np.ndarray:
    gram = _cross_kernel(features, features, cfg)
    gram[np.diag_indices_from(gram)] += cfg.white_noise + cfg.alpha
    return gram


def _factorize(features: np.ndarray, cfg: GpKernelConfig) -> np.ndarray:
    try:
        return linalg.cholesky(_training_matrix(features, cfg), lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError(
            f"Gram matrix is not positive definite (alpha={cfg.alpha}); try a larger alpha") from e


def _log_marginal_likelihood(features: np.ndarray, centered: np.ndarray, cfg: GpKernelConfig) -> float:
    chol = _factorize(features, cfg)
    weights = linalg.cho_solve((chol, True), centered)
    return float(-0.5 * centered @ weights - np.sum(np.log(np.diag(chol)))
                 - 0.5 * len(centered) * np.log(2.0 * np.pi))


def _optimize_kernel(features: np.ndarray, centered: np.ndarray, cfg: GpKernelConfig) -> GpKernelConfig:
    """Maximize the log marginal likelihood over (constant, lengthscale, white) in log space."""
    bounds = [tuple(np.log(b)) for b in (GP_CONSTANT_BOUNDS, GP_LENGTHSCALE_BOUNDS, GP_WHITE_NOISE_BOUNDS)]
    start = np.log([cfg.constant_value, cfg.rbf_lengthscale, max(cfg.white_noise, GP_WHITE_NOISE_BOUNDS[0])])
    start = np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])

    def objective(theta):
        c, length, white = np.exp(theta)
        trial = replace(cfg, constant_value=c, rbf_lengthscale=length, white_noise=white)
        try:
            return -_log_marginal_likelihood(features, centered, trial)
        except NumericalError:
            return 1e25

    result = optimize.minimize(objective, start, method="L-BFGS-B", bounds=bounds)
    c, length, white = np.exp(result.x)
    logger.debug("kernel optimized: constant=%.4g lengthscale=%.4g white=%.4g", c, length, white)
    return replace(cfg, constant_value=float(c), rbf_lengthscale=float(length), white_noise=float(white))


def gp_fit(features, targets, cfg: GpKernelConfig = GpKernelConfig()) -> GpModel:
    """Condition a zero-mean GP on the centered targets.

    Args:
        features: (n, d) encoded training rows. Duplicate rows are allowed.
        targets: n target values.
        cfg: kernel settings; with optimize_hyperparams the kernel is tuned first.

    Returns:
        GpModel holding the Cholesky factor and dual weights.

    Raises:
        ShapeError: no rows, or rows and targets differ in count.
        NumericalError: the Gram matrix is not positive definite.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if len(targets) == 0:
        raise ShapeError("gp_fit needs at least one training point")
    if len(features) != len(targets):
        raise ShapeError(f"{len(features)} feature rows but {len(targets)} targets")
    target_mean = float(np.mean(targets))
    centered = targets - target_mean
    if cfg.optimize_hyperparams:
        cfg = _optimize_kernel(features, centered, cfg)
    chol = _factorize(features, cfg)
    dual_weights = linalg.cho_solve((chol, True), centered)
    return GpModel(features, targets, target_mean, chol, dual_weights, cfg)


def gp_predict(model: GpModel, query) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance at the query rows.

    Returns:
        Tuple of (mean, variance) arrays; variances are clamped at 0.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.size == 0:
        return np.zeros(0), np.zeros(0)
    query = np.atleast_2d(query)
    if query.shape[1] != model.features.shape[1]:
        raise ShapeError(f"query has {query.shape[1]} features, model was fit on {model.features.shape[1]}")
    cross = _cross_kernel(query, model.features, model.config)
    mean = cross @ model.dual_weights + model.target_mean
    v = linalg.solve_triangular(model.cholesky, cross.T, lower=True)
    variance = model.config.constant_value - np.sum(v * v, axis=0)
    if np.any(variance < -GP_VARIANCE_CLAMP_TOL):
        logger.warning("clamping %d negative posterior variances (min %.3g)",
                       int(np.sum(variance < -GP_VARIANCE_CLAMP_TOL)), float(variance.min()))
    return mean, np.maximum(variance, 0.0)


@dataclass(frozen=True, eq=False)
class GpCellRegressor:
    """GP fitted on encoded cells of a design space; predicts posterior means per cell."""

    model: GpModel
    shape: Shape
    kinds: Tuple[str, ...]

    @classmethod
    def fit(cls, train_obs, kinds: Sequence[str], cfg: GpKernelConfig = GpKernelConfig()) -> "GpCellRegressor":
        features = encode_cells(train_obs.indices, train_obs.shape, kinds)
        return cls(gp_fit(features, train_obs.values, cfg), train_obs.shape, tuple(kinds))

    def predict_many(self, indices) -> np.ndarray:
        mean, _ = gp_predict(self.model, encode_cells(indices, self.shape, self.kinds))
        return mean

    def to_dict(self) -> dict:
        return {"shape": self.shape.as_list(), "kinds": list(self.kinds), "gp": self.model.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "GpCellRegressor":
        return cls(GpModel.from_dict(data["gp"]), Shape(tuple(data["shape"])), tuple(data["kinds"]))
