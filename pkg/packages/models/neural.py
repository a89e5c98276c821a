"""Neural tensor completion: per-mode embeddings -> concatenation -> MLP -> scalar."""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from common import ConfigError, ObservationError, ShapeError
from packages.Constants import DEFAULT_HIDDEN_SIZES
from packages.tensor.core import ObservationSet, Shape, as_shape, check_index, check_indices


@dataclass(frozen=True, eq=False)
class NeuralTcModel:
    """Embeddings are (dims[n] x rank); layer k maps sizes[k] -> sizes[k+1] with
    sizes = [ndim * rank, *hidden_sizes, 1]. Hidden layers use ReLU, the output is linear."""

    shape: Shape
    rank: int
    embeddings: Tuple[np.ndarray, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    hidden_sizes: Tuple[int, ...] = tuple(DEFAULT_HIDDEN_SIZES)

    def __post_init__(self):
        shape = as_shape(self.shape)
        rank = int(self.rank)
        hidden = tuple(int(h) for h in self.hidden_sizes)
        if rank < 1:
            raise ConfigError(f"rank must be >= 1, got {rank}")
        if any(h < 1 for h in hidden):
            raise ConfigError(f"hidden sizes must be positive, got {list(hidden)}")
        if len(self.embeddings) != shape.ndim:
            raise ShapeError(f"{len(self.embeddings)} embeddings for a {shape.ndim}-mode shape")
        sizes = [shape.ndim * rank, *hidden, 1]
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError(f"expected {len(sizes) - 1} layers for hidden sizes {list(hidden)}")

        def frozen(arr, expected, what):
            arr = np.array(arr, dtype=np.float64)
            if arr.shape != expected:
                raise ShapeError(f"{what} has shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{what} has non-finite entries")
            arr.setflags(write=False)
            return arr

        embeddings = tuple(frozen(e, (d, rank), f"embedding {n}")
                           for n, (e, d) in enumerate(zip(self.embeddings, shape.dims)))
        weights = tuple(frozen(w, (sizes[k], sizes[k + 1]), f"weight {k}") for k, w in enumerate(self.weights))
        biases = tuple(frozen(b, (sizes[k + 1],), f"bias {k}") for k, b in enumerate(self.biases))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "rank", rank)
        object.__setattr__(self, "hidden_sizes", hidden)
        object.__setattr__(self, "embeddings", embeddings)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def layer_sizes(self) -> List[int]:
        return [self.shape.ndim * self.rank, *self.hidden_sizes, 1]

    @classmethod
    def random(cls, shape, rank: int, rng: np.random.Generator,
               hidden_sizes: Sequence[int] = tuple(DEFAULT_HIDDEN_SIZES)) -> "NeuralTcModel":
        """Embeddings uniform[-0.5, 0.5]/sqrt(rank); Glorot-uniform weights; zero biases."""
        shape = as_shape(shape)
        scale = 1.0 / np.sqrt(rank)
        embeddings = [rng.uniform(-0.5, 0.5, size=(d, rank)) * scale for d in shape.dims]
        sizes = [shape.ndim * rank, *hidden_sizes, 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(shape, rank, tuple(embeddings), tuple(weights), tuple(biases), tuple(hidden_sizes))

    def _forward(self, indices: np.ndarray):
        x = np.concatenate([e[indices[:, n]] for n, e in enumerate(self.embeddings)], axis=1)
        activations = [x]
        pre_activations = []
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre_activations.append(z)
            h = z if k == last else np.maximum(z, 0.0)
            activations.append(h)
        return activations, pre_activations

    def predict_many(self, indices) -> np.ndarray:
        indices = check_indices(self.shape, indices)
        activations, _ = self._forward(indices)
        return activations[-1][:, 0]

    def gradient(self, indices, loss_grads) -> List[np.ndarray]:
        """Backpropagated gradients in parameters() order."""
        indices = check_indices(self.shape, indices)
        loss_grads = np.asarray(loss_grads, dtype=np.float64).reshape(-1)
        if len(loss_grads) != len(indices):
            raise ObservationError(f"{len(loss_grads)} loss gradients for {len(indices)} observations")
        activations, pre_activations = self._forward(indices)

        n_layers = len(self.weights)
        grad_w = [None] * n_layers
        grad_b = [None] * n_layers
        delta = loss_grads[:, None]
        for k in range(n_layers - 1, -1, -1):
            if k != n_layers - 1:
                delta = delta * (pre_activations[k] > 0)
            grad_w[k] = activations[k].T @ delta
            grad_b[k] = delta.sum(axis=0)
            delta = delta @ self.weights[k].T

        grad_e = []
        for n, e in enumerate(self.embeddings):
            g = np.zeros_like(e)
            np.add.at(g, indices[:, n], delta[:, n * self.rank:(n + 1) * self.rank])
            grad_e.append(g)
        layer_grads = [g for pair in zip(grad_w, grad_b) for g in pair]
        return grad_e + layer_grads

    def parameters(self) -> List[np.ndarray]:
        layers = [p for pair in zip(self.weights, self.biases) for p in pair]
        return list(self.embeddings) + layers

    def with_parameters(self, params: Sequence[np.ndarray]) -> "NeuralTcModel":
        n = self.shape.ndim
        layers = list(params[n:])
        return NeuralTcModel(self.shape, self.rank, tuple(params[:n]),
                             tuple(layers[0::2]), tuple(layers[1::2]), self.hidden_sizes)

    def decay_mask(self) -> List[bool]:
        """Weight decay skips biases."""
        return [True] * self.shape.ndim + [True, False] * len(self.weights)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.as_list(),
            "rank": self.rank,
            "hidden_sizes": list(self.hidden_sizes),
            "embeddings": [e.tolist() for e in self.embeddings],
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NeuralTcModel":
        return cls(Shape(tuple(data["shape"])), data["rank"],
                   tuple(np.asarray(e, dtype=np.float64) for e in data["embeddings"]),
                   tuple(np.asarray(w, dtype=np.float64) for w in data["weights"]),
                   tuple(np.asarray(b, dtype=np.float64) for b in data["biases"]),
                   tuple(data["hidden_sizes"]))


def neural_predict(model: NeuralTcModel, index) -> float:
    idx = check_index(model.shape, index)
    return float(model.predict_many(np.asarray([idx]))[0])


def neural_gradient(model: NeuralTcModel, obs: ObservationSet, loss_grads) -> List[np.ndarray]:
    if obs.shape != model.shape:
        raise ShapeError(f"observations have shape {obs.shape.as_list()}, model has {model.shape.as_list()}")
    return model.gradient(obs.indices, loss_grads)
