"""Training-set samplers: uniform without replacement, and biased slice quotas.

Biased sampling draws one exponential(scale=1) variate per slice of the biased
mode, maps the draws affinely so that their minimum lands on the lower bound
l = 3 + 2 * (e_num - 1) and their maximum on 40, rounds half to even, and then
samples that many cells uniformly inside each slice.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from common import ConfigError, LatticompError, ObservationError, derive_rng
from packages.Constants import (BIAS_EXPERIMENTS, BIAS_LOWER_START, BIAS_LOWER_STEP, BIAS_SCALE,
                                BIAS_UPPER, GEOMETRY_NAMES, REFERENCE_QUOTAS)

logger = logging.getLogger(__name__)


def lower_bound(e_num: int) -> int:
    return BIAS_LOWER_START + BIAS_LOWER_STEP * (int(e_num) - 1)


def _check_e_num(e_num: int) -> None:
    if int(e_num) not in BIAS_EXPERIMENTS:
        raise ConfigError(f"experiment number must be in {BIAS_EXPERIMENTS[0]}..{BIAS_EXPERIMENTS[-1]}, got {e_num}")


@dataclass(frozen=True)
class BiasedSamplingPlan:
    e_num: int
    quotas: tuple
    seed: int = 0
    scale: float = BIAS_SCALE
    upper: int = BIAS_UPPER

    def __post_init__(self):
        _check_e_num(self.e_num)
        quotas = tuple(int(q) for q in self.quotas)
        object.__setattr__(self, "quotas", quotas)
        low = self.lower
        for slice_no, q in enumerate(quotas):
            if not low <= q <= self.upper:
                raise ConfigError(f"slice {slice_no} quota {q} outside [{low}, {self.upper}]")

    @property
    def lower(self) -> int:
        return lower_bound(self.e_num)

    @classmethod
    def drawn(cls, e_num: int, seed: int, n_slices: int = len(GEOMETRY_NAMES)) -> "BiasedSamplingPlan":
        return cls(e_num, tuple(biased_quotas(e_num, seed, n_slices)), seed)

    @classmethod
    def reference(cls, e_num: int) -> "BiasedSamplingPlan":
        """The fixed quota row for this experiment number."""
        _check_e_num(e_num)
        return cls(e_num, tuple(REFERENCE_QUOTAS[int(e_num)]), 0)


def uniform_sample(all_cells, n: int, seed: int) -> np.ndarray:
    """n distinct cells chosen uniformly without replacement; returned as an (n, N) index array."""
    cells = np.asarray(all_cells, dtype=np.int64)
    n = int(n)
    if n < 0 or n > len(cells):
        raise ObservationError(f"cannot sample {n} cells from {len(cells)}")
    rng = derive_rng(seed)
    chosen = np.sort(rng.choice(len(cells), size=n, replace=False))
    return cells[chosen]


def biased_quotas(e_num: int, seed: int, n_slices: int = len(GEOMETRY_NAMES)) -> List[int]:
    """Per-slice training counts in [l, 40] with exponential skew.

    Args:
        e_num: experiment number 1..10; sets the lower bound l = 3 + 2 * (e_num - 1).
        seed: seed of the exponential draws.
        n_slices: number of slices of the biased mode.

    Returns:
        One count per slice. The smallest is l and the largest is 40.

    Raises:
        ConfigError: e_num is outside 1..10.
    """
    _check_e_num(e_num)
    rng = derive_rng(seed)
    draws = rng.exponential(BIAS_SCALE, size=n_slices)
    low, high = lower_bound(e_num), BIAS_UPPER
    spread = draws.max() - draws.min()
    if spread > 0:
        mapped = low + (draws - draws.min()) / spread * (high - low)
    else:
        mapped = np.full(n_slices, float(high))
    return [int(q) for q in np.rint(mapped)]


def biased_sample(all_cells, biased_mode: int, plan, seed: Optional[int] = None) -> np.ndarray:
    """Sample quotas[s] distinct cells inside each slice s of the biased mode.

    `plan` is a BiasedSamplingPlan or a bare list of per-slice counts; `seed`
    defaults to the plan's seed.
    """
    cells = np.asarray(all_cells, dtype=np.int64)
    if isinstance(plan, BiasedSamplingPlan):
        quotas, seed = plan.quotas, plan.seed if seed is None else seed
    else:
        quotas = tuple(int(q) for q in plan)
    if seed is None:
        raise ConfigError("biased_sample needs a seed when given bare quotas")
    slice_ids = cells[:, biased_mode]
    n_slices = int(slice_ids.max()) + 1 if len(cells) else 0
    if len(quotas) != n_slices:
        raise ConfigError(f"plan has {len(quotas)} quotas, biased mode has {n_slices} slices")
    rng = derive_rng(seed, 1)
    picked = []
    for s, quota in enumerate(quotas):
        members = np.flatnonzero(slice_ids == s)
        if quota < 0 or quota > len(members):
            raise ObservationError(f"slice {s} quota {quota} exceeds its {len(members)} cells")
        picked.append(members[rng.choice(len(members), size=quota, replace=False)])
    rows = np.sort(np.concatenate(picked)) if picked else np.zeros(0, dtype=np.int64)
    return cells[rows]


def quota_table(plans: Sequence[BiasedSamplingPlan], slice_names: Sequence[str] = GEOMETRY_NAMES) -> pd.DataFrame:
    """One row per experiment: slice quotas and the [l, 40] range."""
    rows = []
    for plan in plans:
        if len(plan.quotas) != len(slice_names):
            raise ConfigError(f"{len(plan.quotas)} quotas for {len(slice_names)} slice names")
        row = {"experiment": plan.e_num}
        row.update(dict(zip(slice_names, plan.quotas)))
        row["range"] = f"[{plan.lower}, {plan.upper}]"
        rows.append(row)
    return pd.DataFrame(rows, columns=["experiment", *slice_names, "range"])


def write_quota_table(plans: Sequence[BiasedSamplingPlan], path: str,
                      slice_names: Sequence[str] = GEOMETRY_NAMES) -> None:
    try:
        quota_table(plans, slice_names).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise LatticompError(f"cannot write {path}: {e}") from e
