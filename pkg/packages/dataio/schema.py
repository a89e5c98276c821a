"""Design space description and the CSV schema used for datasets and predictions.

CSV layout: the header holds one `mode:<name>:<categorical|ordinal>` column per
mode followed by `value`; every data row is one cell, given as the level labels
of its modes and then the value. Files are UTF-8 with LF endings and values are
written with 17 significant digits so that export -> load is lossless.
"""
import json
import os
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from common import DataFormatError, LatticompError, ShapeError
from packages.Constants import GEOMETRY_MODE_NAME, PROPERTY_MODE_NAME, SCHEMA_VERSION
from packages.tensor.core import DenseTensor, ObservationSet, Shape, dense_to_observations

MODE_KINDS = ("categorical", "ordinal")
_HEADER = re.compile(r"^mode:(?P<name>[^:]+):(?P<kind>categorical|ordinal)$")


@dataclass(frozen=True)
class DesignSpace:
    """Names, kinds and level labels of every mode; locates the property and slice modes."""

    mode_names: Tuple[str, ...]
    mode_kinds: Tuple[str, ...]
    levels: Tuple[Tuple[str, ...], ...]
    property_mode: Optional[int] = None
    slice_mode: int = 0

    def __post_init__(self):
        names = tuple(self.mode_names)
        kinds = tuple(self.mode_kinds)
        levels = tuple(tuple(str(label) for label in lv) for lv in self.levels)
        if not len(names) == len(kinds) == len(levels):
            raise ShapeError(f"{len(names)} names, {len(kinds)} kinds and {len(levels)} level lists")
        if len(set(names)) != len(names):
            raise ShapeError(f"mode names must be unique, got {list(names)}")
        for name, kind, lv in zip(names, kinds, levels):
            if kind not in MODE_KINDS:
                raise ShapeError(f"mode {name!r} has unknown kind {kind!r}")
            if len(set(lv)) != len(lv):
                raise ShapeError(f"mode {name!r} repeats a level label")
        for which, mode in (("property", self.property_mode), ("slice", self.slice_mode)):
            if mode is not None and not 0 <= mode < len(names):
                raise ShapeError(f"{which} mode {mode} is not one of the {len(names)} modes")
        object.__setattr__(self, "mode_names", names)
        object.__setattr__(self, "mode_kinds", kinds)
        object.__setattr__(self, "levels", levels)
        Shape(self.dims)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(len(lv) for lv in self.levels)

    @property
    def shape(self) -> Shape:
        return Shape(self.dims)

    def ordinal_modes(self) -> List[int]:
        """Ordinal modes other than the property mode (the default CPD-S smooth modes)."""
        return [m for m, kind in enumerate(self.mode_kinds) if kind == "ordinal" and m != self.property_mode]

    def property_labels(self, indices) -> List[str]:
        """Per-cell property label, or "value" when there is no property mode."""
        indices = np.asarray(indices, dtype=np.int64)
        if self.property_mode is None:
            return ["value"] * len(indices)
        names = self.levels[self.property_mode]
        return [names[i] for i in indices[:, self.property_mode]]

    def header(self) -> List[str]:
        return [f"mode:{n}:{k}" for n, k in zip(self.mode_names, self.mode_kinds)] + ["value"]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "modes": [{"name": n, "kind": k, "levels": list(lv)}
                      for n, k, lv in zip(self.mode_names, self.mode_kinds, self.levels)],
            "property_mode": self.property_mode,
            "slice_mode": self.slice_mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignSpace":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise DataFormatError(f"design space schema_version must be {SCHEMA_VERSION}, "
                                  f"got {data.get('schema_version')!r}")
        try:
            modes = data["modes"]
            return cls(tuple(m["name"] for m in modes), tuple(m["kind"] for m in modes),
                       tuple(tuple(m["levels"]) for m in modes),
                       data.get("property_mode"), data.get("slice_mode", 0))
        except (KeyError, TypeError) as e:
            raise DataFormatError(f"malformed design space document: {e}") from e


def sidecar_path(csv_path: str) -> str:
    """`data.csv` -> `data.space.json`."""
    root, _ = os.path.splitext(csv_path)
    return root + ".space.json"


def write_space(space: DesignSpace, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(space.to_dict(), f, indent=2)
            f.write("\n")
    except OSError as e:
        raise LatticompError(f"cannot write {path}: {e}") from e


def read_space(path: str) -> DesignSpace:
    try:
        with open(path, encoding="utf-8") as f:
            return DesignSpace.from_dict(json.load(f))
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from e


def _default_modes(names: Sequence[str]) -> Tuple[Optional[int], int]:
    property_mode = names.index(PROPERTY_MODE_NAME) if PROPERTY_MODE_NAME in names else None
    slice_mode = names.index(GEOMETRY_MODE_NAME) if GEOMETRY_MODE_NAME in names else 0
    return property_mode, slice_mode


def _infer_levels(column: pd.Series, kind: str, name: str) -> Tuple[str, ...]:
    uniques = list(dict.fromkeys(column.tolist()))
    if kind == "categorical":
        return tuple(uniques)
    numeric = pd.to_numeric(pd.Series(uniques), errors="coerce")
    if numeric.isna().any():
        bad = uniques[int(np.flatnonzero(numeric.isna().to_numpy())[0])]
        raise DataFormatError(f"ordinal mode {name!r} has non-numeric level {bad!r}")
    order = np.argsort(numeric.to_numpy(), kind="stable")
    return tuple(uniques[i] for i in order)


def load_csv(path: str, space: Optional[DesignSpace] = None) -> Tuple[ObservationSet, DesignSpace]:
    """Read a dataset CSV. Levels come from `space`, else from the sidecar next to the file,
    else from the data (first appearance for categorical, numeric order for ordinal)."""
    try:
        # header=None so a row longer than the header is a parse error, not an index column
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise DataFormatError(f"{path}: file not found") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataFormatError(f"{path}: cannot parse ({e})") from e
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"{path}: empty file") from e

    columns = [str(c) for c in raw.iloc[0].tolist()]
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = columns
    if len(columns) < 3 or columns[-1] != "value":
        raise DataFormatError(f"{path}: header must be mode columns followed by 'value', got {columns}")
    names, kinds = [], []
    for col in columns[:-1]:
        match = _HEADER.match(col)
        if not match:
            raise DataFormatError(f"{path}: bad header column {col!r}, expected mode:<name>:<kind>")
        names.append(match["name"])
        kinds.append(match["kind"])
    if len(set(names)) != len(names):
        raise DataFormatError(f"{path}: mode names repeat in the header: {names}")
    if frame.empty:
        raise DataFormatError(f"{path}: no observations")
    if frame.isna().any().any():
        row = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataFormatError(f"{path}: row {row + 2} has too few fields")

    values = pd.to_numeric(frame["value"], errors="coerce")
    if values.isna().any():
        row = int(np.flatnonzero(values.isna().to_numpy())[0])
        raise DataFormatError(f"{path}: row {row + 2} has non-numeric value {frame['value'].iloc[row]!r}")

    if space is None and os.path.exists(sidecar_path(path)):
        space = read_space(sidecar_path(path))
    if space is None:
        levels = tuple(_infer_levels(frame[col], kind, name) for col, kind, name in zip(columns, kinds, names))
        property_mode, slice_mode = _default_modes(names)
        space = DesignSpace(tuple(names), tuple(kinds), levels, property_mode, slice_mode)
    elif list(space.mode_names) != names or list(space.mode_kinds) != kinds:
        raise DataFormatError(f"{path}: header {names} does not match design space {list(space.mode_names)}")

    indices = np.empty((len(frame), len(names)), dtype=np.int64)
    for mode, col in enumerate(columns[:-1]):
        lookup = {label: i for i, label in enumerate(space.levels[mode])}
        mapped = frame[col].map(lookup)
        if mapped.isna().any():
            row = int(np.flatnonzero(mapped.isna().to_numpy())[0])
            raise DataFormatError(f"{path}: row {row + 2} has unknown level {frame[col].iloc[row]!r} "
                                  f"for mode {names[mode]!r}")
        indices[:, mode] = mapped.to_numpy(dtype=np.int64)

    offsets = indices @ np.asarray(space.shape.strides, dtype=np.int64)
    seen = {}
    for row, off in enumerate(offsets.tolist()):
        if off in seen:
            raise DataFormatError(f"{path}: rows {seen[off] + 2} and {row + 2} describe the same cell")
        seen[off] = row

    return ObservationSet(space.shape, indices, values.to_numpy(dtype=np.float64)), space


def align_observations(obs: ObservationSet, source: DesignSpace, target: DesignSpace) -> ObservationSet:
    """Re-express cells indexed against `source` in the level order of `target`.

    Cells are matched label by label, so two spaces that list the same levels in
    a different order map onto each other.

    Args:
        obs: observations indexed against `source`.
        source: design space the indices of `obs` refer to.
        target: design space to index the result against.

    Returns:
        The same cells and values over `target.shape`.

    Raises:
        DataFormatError: the mode names or kinds differ, or a label of `source` is not a level of `target`.
    """
    if source.mode_names != target.mode_names or source.mode_kinds != target.mode_kinds:
        raise DataFormatError(f"design space modes {list(source.mode_names)} do not match "
                              f"{list(target.mode_names)}")
    indices = np.empty_like(obs.indices)
    for mode, name in enumerate(source.mode_names):
        lookup = {label: i for i, label in enumerate(target.levels[mode])}
        missing = [label for label in source.levels[mode] if label not in lookup]
        if missing:
            raise DataFormatError(f"mode {name!r} has levels {missing} unknown to the target design space")
        remap = np.asarray([lookup[label] for label in source.levels[mode]], dtype=np.int64)
        indices[:, mode] = remap[obs.indices[:, mode]]
    return ObservationSet(target.shape, indices, obs.values)


def export_csv(data: Union[DenseTensor, ObservationSet], space: DesignSpace, path: str) -> None:
    """Write cells in lexicographic index order."""
    obs = dense_to_observations(data) if isinstance(data, DenseTensor) else data
    if obs.shape != space.shape:
        raise ShapeError(f"data shape {obs.shape.as_list()} does not match design space {list(space.dims)}")
    obs = obs.sorted()
    columns = {}
    for mode, col in enumerate(space.header()[:-1]):
        labels = np.asarray(space.levels[mode], dtype=object)
        columns[col] = labels[obs.indices[:, mode]] if len(obs) else np.asarray([], dtype=object)
    columns["value"] = obs.values
    frame = pd.DataFrame(columns, columns=space.header())
    try:
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise LatticompError(f"cannot write {path}: {e}") from e
