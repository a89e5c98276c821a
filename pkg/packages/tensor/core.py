"""Dense tensors, sparse observation sets and row-major index arithmetic.

Every model in the toolkit addresses cells through a multi-index; the flat
offset used in storage and files is the row-major linearization, so the last
mode varies fastest.
"""
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from common import ObservationError, ShapeError

MultiIndex = Tuple[int, ...]
IndexLike = Union[Sequence[int], np.ndarray]


@dataclass(frozen=True)
class Shape:
    """Mode sizes of an N-mode tensor (N >= 2)."""

    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise ShapeError(f"a shape needs at least 2 modes, got {len(dims)}")
        for mode, d in enumerate(dims):
            if d < 1:
                raise ShapeError(f"mode {mode} has size {d}; every mode needs size >= 1")
        total = 1
        for d in dims:
            total *= d
        if total >= 2 ** 63:
            raise ShapeError(f"shape {list(dims)} has too many cells to count")
        object.__setattr__(self, "dims", dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    @property
    def strides(self) -> Tuple[int, ...]:
        strides = [1] * self.ndim
        for mode in range(self.ndim - 2, -1, -1):
            strides[mode] = strides[mode + 1] * self.dims[mode + 1]
        return tuple(strides)

    def as_list(self) -> List[int]:
        return list(self.dims)


def as_shape(shape) -> Shape:
    return shape if isinstance(shape, Shape) else Shape(tuple(shape))


def check_index(shape: Shape, index: IndexLike) -> MultiIndex:
    """Validate one multi-index and return it as a tuple of ints."""
    idx = tuple(int(i) for i in index)
    if len(idx) != shape.ndim:
        raise ShapeError(f"index {idx} has {len(idx)} components, shape has {shape.ndim} modes")
    for mode, (i, d) in enumerate(zip(idx, shape.dims)):
        if i < 0 or i >= d:
            raise ShapeError(f"index {idx} out of bounds in mode {mode}: {i} not in [0, {d})")
    return idx


def check_indices(shape: Shape, indices) -> np.ndarray:
    """Validate an (n, N) array of multi-indices; raises naming the first bad mode."""
    arr = np.asarray(indices, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, shape.ndim)
    if arr.ndim != 2 or arr.shape[1] != shape.ndim:
        raise ShapeError(f"expected indices of shape (n, {shape.ndim}), got {arr.shape}")
    dims = np.asarray(shape.dims, dtype=np.int64)
    bad = (arr < 0) | (arr >= dims)
    if bad.any():
        row, mode = np.argwhere(bad)[0]
        raise ShapeError(
            f"index {tuple(int(i) for i in arr[row])} out of bounds in mode {mode}: "
            f"{int(arr[row, mode])} not in [0, {shape.dims[mode]})")
    return arr


def linearize(shape, index: IndexLike) -> int:
    """Row-major flat offset of a multi-index."""
    shape = as_shape(shape)
    idx = check_index(shape, index)
    return int(sum(i * s for i, s in zip(idx, shape.strides)))


def delinearize(shape, offset: int) -> MultiIndex:
    """Inverse of linearize."""
    shape = as_shape(shape)
    offset = int(offset)
    if offset < 0 or offset >= shape.size:
        raise ShapeError(f"offset {offset} outside [0, {shape.size})")
    out = []
    for stride in shape.strides:
        out.append(offset // stride)
        offset %= stride
    return tuple(out)


def linearize_many(shape: Shape, indices) -> np.ndarray:
    arr = check_indices(shape, indices)
    return arr @ np.asarray(shape.strides, dtype=np.int64)


def all_cells(shape) -> np.ndarray:
    """Every multi-index of the shape, in row-major order, as an (size, N) array."""
    shape = as_shape(shape)
    grids = np.indices(shape.dims).reshape(shape.ndim, -1)
    return grids.T.astype(np.int64)


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Full tensor stored as a flat row-major array of finite values."""

    shape: Shape
    values: np.ndarray

    def __post_init__(self):
        shape = as_shape(self.shape)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != shape.size:
            raise ShapeError(f"{values.size} values given for shape {shape.as_list()} ({shape.size} cells)")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ShapeError(f"non-finite value at cell {delinearize(shape, bad)}")
        values.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, array) -> "DenseTensor":
        array = np.asarray(array, dtype=np.float64)
        return cls(Shape(array.shape), array.reshape(-1))

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.shape.dims)

    def at(self, index: IndexLike) -> float:
        return float(self.values[linearize(self.shape, index)])

    def gather(self, indices) -> np.ndarray:
        return self.values[linearize_many(self.shape, indices)]


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Sparse (multi-index, value) pairs over a shape; indices are unique."""

    shape: Shape
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        shape = as_shape(self.shape)
        indices = check_indices(shape, self.indices).copy()
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if len(values) != len(indices):
            raise ObservationError(f"{len(indices)} indices but {len(values)} values")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ObservationError(f"non-finite value at {tuple(int(i) for i in indices[bad])}")
        offsets = indices @ np.asarray(shape.strides, dtype=np.int64)
        uniq, counts = np.unique(offsets, return_counts=True)
        if np.any(counts > 1):
            dup = delinearize(shape, int(uniq[np.argmax(counts > 1)]))
            raise ObservationError(f"duplicate observation at index {dup}")
        indices.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_entries(cls, shape, entries: Iterable[Tuple[IndexLike, float]]) -> "ObservationSet":
        shape = as_shape(shape)
        entries = list(entries)
        if not entries:
            return cls.empty(shape)
        indices = np.array([tuple(idx) for idx, _ in entries], dtype=np.int64)
        values = np.array([v for _, v in entries], dtype=np.float64)
        return cls(shape, indices, values)

    @classmethod
    def empty(cls, shape) -> "ObservationSet":
        shape = as_shape(shape)
        return cls(shape, np.zeros((0, shape.ndim), dtype=np.int64), np.zeros(0))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def entries(self) -> List[Tuple[MultiIndex, float]]:
        return [(tuple(int(i) for i in idx), float(v)) for idx, v in zip(self.indices, self.values)]

    def offsets(self) -> np.ndarray:
        return self.indices @ np.asarray(self.shape.strides, dtype=np.int64)

    def index_set(self) -> set:
        return {tuple(int(i) for i in idx) for idx in self.indices}

    def take(self, rows) -> "ObservationSet":
        rows = np.asarray(rows, dtype=np.int64)
        return ObservationSet(self.shape, self.indices[rows], self.values[rows])

    def sorted(self) -> "ObservationSet":
        """Same entries in row-major (lexicographic index) order."""
        return self.take(np.argsort(self.offsets(), kind="stable"))


def split_observations(all_obs: ObservationSet, train_indices) -> Tuple[ObservationSet, ObservationSet]:
    """Partition observations into (train, test), test being the complement of train.

    Args:
        all_obs: every known cell.
        train_indices: (n, N) multi-indices to put in the training set.

    Raises:
        ObservationError: a training index is not among `all_obs`.
    """
    if not isinstance(train_indices, np.ndarray):
        train_indices = list(train_indices)
    train_arr = np.asarray(train_indices, dtype=np.int64)
    if train_arr.size == 0:
        return ObservationSet.empty(all_obs.shape), all_obs
    train_offsets = linearize_many(all_obs.shape, train_arr.reshape(-1, all_obs.shape.ndim))
    all_offsets = all_obs.offsets()
    present = np.isin(train_offsets, all_offsets)
    if not present.all():
        missing = delinearize(all_obs.shape, int(train_offsets[np.argmin(present)]))
        raise ObservationError(f"train index {missing} is not among the observations")
    in_train = np.isin(all_offsets, train_offsets)
    return all_obs.take(np.flatnonzero(in_train)), all_obs.take(np.flatnonzero(~in_train))


def dense_to_observations(tensor: DenseTensor) -> ObservationSet:
    """Observe every cell of a dense tensor."""
    return ObservationSet(tensor.shape, all_cells(tensor.shape), tensor.values)


def observations_to_dense(obs: ObservationSet) -> DenseTensor:
    """Assemble a dense tensor from a complete observation set."""
    if len(obs) != obs.shape.size:
        raise ObservationError(
            f"observation set covers {len(obs)} of {obs.shape.size} cells; cannot build a dense tensor")
    values = np.empty(obs.shape.size)
    values[obs.offsets()] = obs.values
    return DenseTensor(obs.shape, values)
