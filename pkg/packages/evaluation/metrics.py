"""Held-out metrics and parity-plot data."""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from common import ObservationError
from packages.training import mae  # noqa: F401


def _pair(actual, predicted) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if len(a) != len(p):
        raise ObservationError(f"length mismatch: {len(a)} actual vs {len(p)} predicted")
    return a, p


def r2(actual, predicted) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot about the mean of `actual`.

    Raises:
        ObservationError: the lengths differ or R^2 is undefined (under 2 values or constant actuals).
    """
    a, p = _pair(actual, predicted)
    if len(a) < 2:
        raise ObservationError(f"R^2 needs at least 2 values, got {len(a)}")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ObservationError("R^2 is undefined when every actual value is identical")
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True, eq=False)
class ParityData:
    actual: np.ndarray
    predicted: np.ndarray
    labels: Tuple[str, ...]
    identity_range: Optional[Tuple[float, float]]

    def __len__(self) -> int:
        return len(self.actual)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"actual": self.actual, "predicted": self.predicted,
                             "property_label": list(self.labels)},
                            columns=["actual", "predicted", "property_label"])


def parity_data(actual, predicted, labels: Optional[Sequence[str]] = None) -> ParityData:
    """(actual, predicted) rows plus the [low, high] span of the identity line; None when empty."""
    a, p = _pair(actual, predicted)
    labels = tuple(labels) if labels is not None else ("value",) * len(a)
    if len(labels) != len(a):
        raise ObservationError(f"{len(labels)} labels for {len(a)} parity rows")
    span = None
    if len(a):
        both = np.concatenate([a, p])
        span = (float(both.min()), float(both.max()))
    return ParityData(a, p, labels, span)


def property_stats(values, labels: Sequence[str]) -> Dict[str, Tuple[float, float]]:
    """Mean and population std per property label (std 0 is replaced by 1)."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=object)
    stats = {}
    for label in sorted(set(labels.tolist())):
        group = values[labels == label]
        std = float(group.std())
        stats[label] = (float(group.mean()), std if std > 0 else 1.0)
    return stats


def standardize(values, labels: Sequence[str], stats: Dict[str, Tuple[float, float]]) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    for i, label in enumerate(labels):
        if label not in stats:
            raise ObservationError(f"no training statistics for property {label!r}")
        mean, std = stats[label]
        out[i] = (values[i] - mean) / std
    return out


def joint_standardized_r2(actual, predicted, labels: Sequence[str],
                          stats: Dict[str, Tuple[float, float]]) -> float:
    """R^2 over every cell at once, after z-scoring each property with the given statistics."""
    return r2(standardize(actual, labels, stats), standardize(predicted, labels, stats))


def per_property_r2(actual, predicted, labels: Sequence[str]) -> Dict[str, float]:
    """Raw-scale R^2 per property label; NaN where it is undefined for that group."""
    a, p = _pair(actual, predicted)
    labels = np.asarray(labels, dtype=object)
    scores: Dict[str, float] = {}
    for label in sorted(set(labels.tolist())):
        mask = labels == label
        try:
            scores[label] = r2(a[mask], p[mask])
        except ObservationError:
            scores[label] = float("nan")
    return scores
