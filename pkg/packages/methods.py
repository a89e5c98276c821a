"""Named surrogate methods: parsing from run configs, fitting, and full-space prediction.

A method is one of the completion models (cpd, cpd_s, neural), a stacking
ensemble (ensemble, cpds_ensemble) or the Gaussian process baseline (gp).
Every fitted method exposes predict_many(indices) and a shape.
"""
import logging
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from common import ConfigError, build_dataclass
from packages.Constants import CPDS_ENSEMBLE_MEMBERS, DEFAULT_ENSEMBLE_MEMBERS
from packages.baselines.gp import GpCellRegressor, GpKernelConfig
from packages.dataio.schema import DesignSpace
from packages.ensemble.forest import ForestSpec
from packages.ensemble.stacking import (COMPLETION_KINDS, EnsembleSpec, MemberSpec, ensemble_fit,
                                        fit_completion)
from packages.tensor.core import DenseTensor, ObservationSet, all_cells
from packages.training import TrainConfig, TrainTrace

logger = logging.getLogger(__name__)

ENSEMBLE_KINDS = ("ensemble", "cpds_ensemble")
METHOD_KINDS = COMPLETION_KINDS + ENSEMBLE_KINDS + ("gp",)
DEFAULT_RANKS = {"cpd": 2, "cpd_s": 2, "neural": 24}

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed", "smoothness"}
_MEMBER_KEYS = {"kind", "rank", "train", "hidden_sizes", "smooth_modes", "smoothness_weight"}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    kind: str
    member: Optional[MemberSpec] = None
    ensemble: Optional[EnsembleSpec] = None
    kernel: Optional[GpKernelConfig] = None


@dataclass
class FittedMethod:
    name: str
    kind: str
    predictor: object
    trace: Optional[TrainTrace] = None

    @property
    def shape(self):
        return self.predictor.shape

    def predict_many(self, indices) -> np.ndarray:
        return self.predictor.predict_many(indices)


def _check_keys(data: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown field")


def _parse_train(data, where: str, base: TrainConfig = TrainConfig()) -> TrainConfig:
    if data is None:
        return base
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    _check_keys(data, _TRAIN_KEYS, where)
    try:
        return replace(base, **data)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_member(data: dict, where: str, train_base: TrainConfig) -> MemberSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    _check_keys(data, _MEMBER_KEYS, where)
    kind = data.get("kind")
    if kind not in COMPLETION_KINDS:
        raise ConfigError(f"{where}.kind: unknown completion model {kind!r}")
    options = {k: v for k, v in data.items() if k not in ("kind", "train")}
    options.setdefault("rank", DEFAULT_RANKS[kind])
    if "hidden_sizes" in options:
        options["hidden_sizes"] = tuple(options["hidden_sizes"])
    if options.get("smooth_modes") is not None:
        options["smooth_modes"] = tuple(options["smooth_modes"])
    try:
        return MemberSpec(kind=kind, train=_parse_train(data.get("train"), f"{where}.train", train_base), **options)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_method(data: Union[str, dict], where: str = "methods") -> MethodSpec:
    """A bare kind name means that kind with default settings."""
    if isinstance(data, str):
        data = {"kind": data}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a method name or object")
    kind = data.get("kind")
    if kind not in METHOD_KINDS:
        raise ConfigError(f"{where}.kind: unknown method {kind!r}; expected one of {list(METHOD_KINDS)}")
    name = str(data.get("name", kind))
    body = {k: v for k, v in data.items() if k not in ("name",)}

    if kind in COMPLETION_KINDS:
        return MethodSpec(name, kind, member=_parse_member(body, where, TrainConfig()))

    if kind in ENSEMBLE_KINDS:
        _check_keys(body, {"kind", "members", "train", "forest", "stacking", "folds"}, where)
        train_base = _parse_train(body.get("train"), f"{where}.train")
        preset = DEFAULT_ENSEMBLE_MEMBERS if kind == "ensemble" else CPDS_ENSEMBLE_MEMBERS
        raw_members = body.get("members") or [{"kind": k, "rank": r} for k, r in preset]
        members = tuple(_parse_member(m, f"{where}.members[{i}]", train_base) for i, m in enumerate(raw_members))
        forest = build_dataclass(ForestSpec, body.get("forest"), f"{where}.forest")
        options = {k: body[k] for k in ("stacking", "folds") if k in body}
        return MethodSpec(name, kind, ensemble=EnsembleSpec(members=members, forest=forest, **options))

    _check_keys(body, {"kind", "kernel"}, where)
    return MethodSpec(name, kind, kernel=build_dataclass(GpKernelConfig, body.get("kernel"), f"{where}.kernel"))


def parse_methods(items: Sequence, where: str = "methods") -> Tuple[MethodSpec, ...]:
    if not items:
        raise ConfigError(f"{where}: at least one method is required")
    specs = tuple(parse_method(item, f"{where}[{i}]") for i, item in enumerate(items))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"{where}: method names must be unique, got {names}")
    return specs


def fit_method(method: MethodSpec, train_obs: ObservationSet, space: DesignSpace, seed: int,
               jobs: int = 1) -> FittedMethod:
    """Fit one method on the observed cells with a method-specific seed."""
    if space.shape != train_obs.shape:
        raise ConfigError(f"design space {list(space.dims)} does not match observations {train_obs.shape.as_list()}")
    if method.kind in COMPLETION_KINDS:
        model, trace = fit_completion(method.member, train_obs, seed, space.ordinal_modes())
        return FittedMethod(method.name, method.kind, model, trace)
    if method.kind in ENSEMBLE_KINDS:
        ensemble = ensemble_fit(replace(method.ensemble, seed=seed), train_obs, space.ordinal_modes(), jobs)
        return FittedMethod(method.name, method.kind, ensemble)
    regressor = GpCellRegressor.fit(train_obs, space.mode_kinds, method.kernel)
    return FittedMethod(method.name, method.kind, regressor)


def predict_space(fitted: FittedMethod) -> DenseTensor:
    return DenseTensor(fitted.shape, fitted.predict_many(all_cells(fitted.shape)))
