"""Stacking ensemble: several completion models, aggregated per cell by a random forest.

Members train on the observed cells; the forest is fit on the members'
predictions at those cells (or on out-of-fold predictions in k-fold mode) with
the observed values as targets, and then predicts every cell of the space.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from common import ConfigError, ObservationError, ShapeError, derive_rng, derive_seed
from packages.Constants import (DEFAULT_ENSEMBLE_MEMBERS, DEFAULT_HIDDEN_SIZES, DEFAULT_SMOOTHNESS_WEIGHT,
                                STACKING_FOLDS)
from packages.ensemble.forest import Forest, ForestSpec, forest_fit, forest_predict
from packages.models.cpd import CpdModel, SmoothnessSpec
from packages.models.neural import NeuralTcModel
from packages.tensor.core import DenseTensor, ObservationSet, Shape, all_cells, linearize_many, observations_to_dense
from packages.training import TrainConfig, train

logger = logging.getLogger(__name__)

COMPLETION_KINDS = ("cpd", "cpd_s", "neural")
STACKING_MODES = ("observed", "kfold")


@dataclass(frozen=True)
class MemberSpec:
    """One completion model: kind, rank and training config.

    smooth_modes=None means "every ordinal mode" for cpd_s; seed=None derives
    the member's seed from the ensemble seed and the member's position.
    """

    kind: str
    rank: int
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_sizes: Tuple[int, ...] = tuple(DEFAULT_HIDDEN_SIZES)
    smooth_modes: Optional[Tuple[int, ...]] = None
    smoothness_weight: float = DEFAULT_SMOOTHNESS_WEIGHT
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in COMPLETION_KINDS:
            raise ConfigError(f"unknown completion model kind {self.kind!r}; expected one of {COMPLETION_KINDS}")
        if int(self.rank) < 1:
            raise ConfigError(f"member rank must be >= 1, got {self.rank}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.smooth_modes is not None:
            object.__setattr__(self, "smooth_modes", tuple(int(m) for m in self.smooth_modes))

    @property
    def label(self) -> str:
        return f"{self.kind}-r{self.rank}"


@dataclass(frozen=True)
class EnsembleSpec:
    members: Tuple[MemberSpec, ...] = tuple(MemberSpec(k, r) for k, r in DEFAULT_ENSEMBLE_MEMBERS)
    forest: ForestSpec = field(default_factory=ForestSpec)
    seed: int = 0
    stacking: str = "observed"
    folds: int = STACKING_FOLDS

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) < 2:
            raise ConfigError(f"an ensemble needs at least 2 members, got {len(self.members)}")
        if self.stacking not in STACKING_MODES:
            raise ConfigError(f"stacking must be one of {STACKING_MODES}, got {self.stacking!r}")
        if int(self.folds) < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")


def fit_completion(member: MemberSpec, train_obs: ObservationSet, seed: int,
                   ordinal_modes: Sequence[int] = ()):
    """Initialize a member model from `seed` and train it; returns (model, TrainTrace)."""
    config = replace(member.train, seed=int(seed))
    rng = derive_rng(config.seed)
    if member.kind == "neural":
        model = NeuralTcModel.random(train_obs.shape, member.rank, rng, member.hidden_sizes)
    else:
        model = CpdModel.random(train_obs.shape, member.rank, rng)
    if member.kind == "cpd_s":
        modes = member.smooth_modes if member.smooth_modes is not None else tuple(ordinal_modes)
        config = replace(config, smoothness=SmoothnessSpec(frozenset(modes), member.smoothness_weight))
    return train(model, train_obs, config)


@dataclass(frozen=True, eq=False)
class TrainedEnsemble:
    members: Tuple[object, ...]
    labels: Tuple[str, ...]
    forest: Forest

    @property
    def shape(self) -> Shape:
        return self.members[0].shape

    def predict_many(self, indices) -> np.ndarray:
        return forest_predict(self.forest, build_stack_features(self.members, indices))


def build_stack_features(members: Sequence, cells) -> np.ndarray:
    """Row per cell, column per member: the member's prediction at that cell."""
    if not members:
        raise ConfigError("no ensemble members")
    shape = members[0].shape
    for k, m in enumerate(members[1:], start=1):
        if m.shape != shape:
            raise ShapeError(f"member {k} has shape {m.shape.as_list()}, member 0 has {shape.as_list()}")
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, shape.ndim)
    return np.column_stack([m.predict_many(cells) for m in members])


def _member_seed(spec: EnsembleSpec, ordinal: int) -> int:
    member = spec.members[ordinal]
    return member.seed if member.seed is not None else derive_seed(spec.seed, "member", ordinal)


def fit_members(spec: EnsembleSpec, train_obs: ObservationSet, ordinal_modes: Sequence[int] = (),
                jobs: int = 1) -> List[object]:
    """Train every member; results come back in member order whatever the job count."""
    n = len(spec.members)
    results: Dict[int, object] = {}

    def fit_one(k: int):
        model, _ = fit_completion(spec.members[k], train_obs, _member_seed(spec, k), ordinal_modes)
        return model

    if jobs and jobs > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=jobs) as exe:
            futures = {exe.submit(fit_one, k): k for k in range(n)}
            for done, fut in enumerate(as_completed(futures), start=1):
                k = futures[fut]
                results[k] = fut.result()
                logger.debug("member %s trained (%d/%d)", spec.members[k].label, done, n)
    else:
        for k in range(n):
            results[k] = fit_one(k)
            logger.debug("member %s trained (%d/%d)", spec.members[k].label, k + 1, n)
    return [results[k] for k in range(n)]


def _out_of_fold_features(spec: EnsembleSpec, train_obs: ObservationSet, ordinal_modes: Sequence[int],
                          jobs: int) -> np.ndarray:
    n = len(train_obs)
    folds = min(int(spec.folds), n)
    if folds < 2:
        raise ConfigError(f"k-fold stacking needs at least 2 observations, got {n}")
    order = derive_rng(spec.seed, 2).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % folds
    features = np.empty((n, len(spec.members)))
    for fold in range(folds):
        held = np.flatnonzero(assignment == fold)
        kept = np.flatnonzero(assignment != fold)
        members = fit_members(spec, train_obs.take(kept), ordinal_modes, jobs)
        features[held] = build_stack_features(members, train_obs.indices[held])
        logger.debug("stacking fold %d/%d done", fold + 1, folds)
    return features


def ensemble_fit(spec: EnsembleSpec, train_obs: ObservationSet, ordinal_modes: Sequence[int] = (),
                 jobs: int = 1) -> TrainedEnsemble:
    if len(train_obs) == 0:
        raise ConfigError("cannot fit an ensemble on an empty observation set")
    members = fit_members(spec, train_obs, ordinal_modes, jobs)
    if spec.stacking == "kfold":
        stack = _out_of_fold_features(spec, train_obs, ordinal_modes, jobs)
    else:
        stack = build_stack_features(members, train_obs.indices)
    forest_spec = replace(spec.forest, seed=derive_seed(spec.seed, "forest", spec.forest.seed))
    forest = forest_fit(stack, train_obs.values, forest_spec)
    return TrainedEnsemble(tuple(members), tuple(m.label for m in spec.members), forest)


def ensemble_train_predict(spec: EnsembleSpec, train_obs: ObservationSet, cells=None,
                           ordinal_modes: Sequence[int] = (), jobs: int = 1) -> DenseTensor:
    """Fit the ensemble on the observed cells and predict the whole design space.

    Args:
        spec: members, forest and stacking mode.
        train_obs: observed cells and values; must not be empty.
        cells: every cell of the space, in any order. Defaults to all cells in row-major order.
        ordinal_modes: modes a cpd_s member smooths when it names none itself.
        jobs: worker threads for member training.

    Returns:
        Dense prediction tensor over `train_obs.shape`.

    Raises:
        ObservationError: `cells` leaves part of the space uncovered.
    """
    if cells is None:
        cells = all_cells(train_obs.shape)
    else:
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, train_obs.shape.ndim)
        covered = np.unique(linearize_many(train_obs.shape, cells))
        if len(covered) != train_obs.shape.size:
            raise ObservationError(f"cells cover {len(covered)} of the {train_obs.shape.size} cells of the space; "
                                   "a dense prediction needs every cell")
    ensemble = ensemble_fit(spec, train_obs, ordinal_modes, jobs)
    predictions = ensemble.predict_many(cells)
    return observations_to_dense(ObservationSet(train_obs.shape, cells, predictions))
