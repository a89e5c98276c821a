"""CSV writers for sweep results and parity data, plus the parity plot.

All CSVs are UTF-8 with LF line endings and 17 significant digits, so reruns
with the same config are byte-identical.
"""
import logging
from typing import Sequence

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from common import LatticompError
from packages.Constants import PARITY_SVG_SIZE
from packages.evaluation.metrics import ParityData
from packages.evaluation.sweeps import ExperimentReport, TrialResult

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = ["method", "group_key", "iteration", "seed", "train_size", "r2", "mae", "train_seconds"]
REPORT_COLUMNS = ["method", "group_key", "mean_r2", "std_r2", "mean_mae", "std_mae"]
PROPERTY_COLUMNS = ["method", "group_key", "iteration", "property_label", "r2"]


def write_frame(frame: pd.DataFrame, path: str) -> str:
    try:
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise LatticompError(f"cannot write {path}: {e}") from e
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def trials_frame(trials: Sequence[TrialResult]) -> pd.DataFrame:
    rows = [{c: getattr(t, c) for c in TRIAL_COLUMNS} for t in trials]
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


def reports_frame(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    rows = [{c: getattr(r, c) for c in REPORT_COLUMNS} for r in reports]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def property_frame(trials: Sequence[TrialResult]) -> pd.DataFrame:
    rows = [{"method": t.method, "group_key": t.group_key, "iteration": t.iteration,
             "property_label": label, "r2": value}
            for t in trials for label, value in sorted(t.r2_by_property.items())]
    return pd.DataFrame(rows, columns=PROPERTY_COLUMNS)


def write_trials(trials: Sequence[TrialResult], path: str) -> str:
    return write_frame(trials_frame(trials), path)


def write_reports(reports: Sequence[ExperimentReport], path: str) -> str:
    return write_frame(reports_frame(reports), path)


def write_property_trials(trials: Sequence[TrialResult], path: str) -> str:
    return write_frame(property_frame(trials), path)


def write_parity_csv(parity: ParityData, path: str) -> str:
    return write_frame(parity.to_frame(), path)


def parity_figure(parity: ParityData, title: str = ""):
    """Predicted against actual, one color per property label, with the dashed identity line."""
    # 72 pt per inch: a PARITY_SVG_SIZE x PARITY_SVG_SIZE viewBox
    fig, ax = plt.subplots(figsize=(PARITY_SVG_SIZE / 72, PARITY_SVG_SIZE / 72))
    labels = np.asarray(parity.labels, dtype=object)
    for label in sorted(set(parity.labels)):
        mask = labels == label
        ax.scatter(parity.actual[mask], parity.predicted[mask], s=12, alpha=0.7, label=label)
    if parity.identity_range is not None:
        low, high = parity.identity_range
        pad = (high - low) * 0.05 if high > low else max(abs(low), 1.0) * 0.05
        ax.plot([low - pad, high + pad], [low - pad, high + pad], linestyle="--", color="gray", linewidth=1)
        ax.set_xlim(low - pad, high + pad)
        ax.set_ylim(low - pad, high + pad)
        ax.legend(loc="upper left")
    ax.set_aspect("equal")
    ax.set_xlabel("actual")
    ax.set_ylabel("predicted")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def write_parity_svg(parity: ParityData, path: str, title: str = "") -> str:
    fig = parity_figure(parity, title)
    try:
        # ids and metadata stay fixed across reruns
        with plt.rc_context({"svg.hashsalt": "latticomp", "svg.fonttype": "none"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise LatticompError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    return path
