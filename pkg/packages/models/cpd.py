"""CP decomposition completion model and its smoothness-regularized variant.

A rank-R model keeps one (dim_n x R) factor matrix per mode; the value of a
cell is the sum over components of the product of the factor rows selected by
the cell's index. CPD-S is the same model trained with a penalty on squared
first-order row differences of the factor matrices of ordinal modes.
"""
from dataclasses import dataclass, field
from typing import FrozenSet, List, Sequence, Tuple

import numpy as np

from common import ConfigError, ObservationError, ShapeError
from packages.Constants import DEFAULT_SMOOTHNESS_WEIGHT
from packages.tensor.core import (DenseTensor, ObservationSet, Shape, all_cells, as_shape,
                                  check_index, check_indices)


@dataclass(frozen=True)
class SmoothnessSpec:
    """Which modes get the row-difference penalty, and its weight lambda."""

    smooth_modes: FrozenSet[int] = field(default_factory=frozenset)
    weight: float = DEFAULT_SMOOTHNESS_WEIGHT

    def __post_init__(self):
        object.__setattr__(self, "smooth_modes", frozenset(int(m) for m in self.smooth_modes))
        if not self.weight >= 0:
            raise ConfigError(f"smoothness weight must be >= 0, got {self.weight}")

    def validate_for(self, shape: Shape) -> None:
        for mode in self.smooth_modes:
            if mode < 0 or mode >= shape.ndim:
                raise ConfigError(f"smooth mode {mode} is not a mode of shape {shape.as_list()}")


@dataclass(frozen=True, eq=False)
class CpdModel:
    """Rank-R CP model: factors[n] has shape (dims[n], R)."""

    shape: Shape
    rank: int
    factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        shape = as_shape(self.shape)
        if int(self.rank) < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if len(self.factors) != shape.ndim:
            raise ShapeError(f"{len(self.factors)} factor matrices for a {shape.ndim}-mode shape")
        factors = []
        for mode, (f, d) in enumerate(zip(self.factors, shape.dims)):
            f = np.array(f, dtype=np.float64)
            if f.shape != (d, int(self.rank)):
                raise ShapeError(f"factor {mode} has shape {f.shape}, expected ({d}, {self.rank})")
            if not np.all(np.isfinite(f)):
                raise ShapeError(f"factor {mode} has non-finite entries")
            f.setflags(write=False)
            factors.append(f)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "rank", int(self.rank))
        object.__setattr__(self, "factors", tuple(factors))

    @classmethod
    def random(cls, shape, rank: int, rng: np.random.Generator) -> "CpdModel":
        """Uniform[-0.5, 0.5] entries scaled by 1/sqrt(rank)."""
        shape = as_shape(shape)
        scale = 1.0 / np.sqrt(rank)
        factors = [rng.uniform(-0.5, 0.5, size=(d, rank)) * scale for d in shape.dims]
        return cls(shape, rank, tuple(factors))

    def _component_rows(self, indices: np.ndarray) -> List[np.ndarray]:
        return [f[indices[:, n]] for n, f in enumerate(self.factors)]

    def predict_many(self, indices) -> np.ndarray:
        indices = check_indices(self.shape, indices)
        prod = np.ones((len(indices), self.rank))
        for rows in self._component_rows(indices):
            prod *= rows
        return prod.sum(axis=1)

    def gradient(self, indices, loss_grads) -> List[np.ndarray]:
        indices = check_indices(self.shape, indices)
        loss_grads = np.asarray(loss_grads, dtype=np.float64).reshape(-1)
        if len(loss_grads) != len(indices):
            raise ObservationError(f"{len(loss_grads)} loss gradients for {len(indices)} observations")
        rows = self._component_rows(indices)
        grads = []
        for n in range(self.shape.ndim):
            others = np.ones((len(indices), self.rank))
            for m, r in enumerate(rows):
                if m != n:
                    others *= r
            g = np.zeros_like(self.factors[n])
            np.add.at(g, indices[:, n], loss_grads[:, None] * others)
            grads.append(g)
        return grads

    def parameters(self) -> List[np.ndarray]:
        return list(self.factors)

    def with_parameters(self, params: Sequence[np.ndarray]) -> "CpdModel":
        return CpdModel(self.shape, self.rank, tuple(params))

    def decay_mask(self) -> List[bool]:
        return [True] * self.shape.ndim

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.as_list(),
            "rank": self.rank,
            "factors": [f.tolist() for f in self.factors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CpdModel":
        return cls(Shape(tuple(data["shape"])), data["rank"],
                   tuple(np.asarray(f, dtype=np.float64) for f in data["factors"]))


def cpd_predict(model: CpdModel, index) -> float:
    idx = check_index(model.shape, index)
    return float(model.predict_many(np.asarray([idx]))[0])


def cpd_reconstruct(model: CpdModel) -> DenseTensor:
    return DenseTensor(model.shape, model.predict_many(all_cells(model.shape)))


def cpd_gradient(model: CpdModel, obs: ObservationSet, loss_grads) -> List[np.ndarray]:
    """Gradient of sum_i loss_grads[i] * prediction(obs_i) with respect to every factor."""
    if obs.shape != model.shape:
        raise ShapeError(f"observations have shape {obs.shape.as_list()}, model has {model.shape.as_list()}")
    return model.gradient(obs.indices, loss_grads)


def smoothness_penalty(model: CpdModel, spec: SmoothnessSpec) -> Tuple[float, List[np.ndarray]]:
    """lambda * sum of squared row differences over the smooth modes, and its gradient."""
    spec.validate_for(model.shape)
    grads = [np.zeros_like(f) for f in model.factors]
    value = 0.0
    if spec.weight == 0:
        return value, grads
    for mode in sorted(spec.smooth_modes):
        f = model.factors[mode]
        if f.shape[0] < 2:
            continue
        diff = f[1:] - f[:-1]
        value += spec.weight * float(np.sum(diff ** 2))
        g = grads[mode]
        g[1:] += 2.0 * spec.weight * diff
        g[:-1] -= 2.0 * spec.weight * diff
    return value, grads
