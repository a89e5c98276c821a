"""Fitted-method artifacts as JSON: schema version, kind, shape, design space and payload."""
import json
import logging
from typing import Tuple

from common import DataFormatError, LatticompError
from packages.Constants import SCHEMA_VERSION
from packages.baselines.gp import GpCellRegressor
from packages.dataio.schema import DesignSpace
from packages.ensemble.forest import Forest
from packages.ensemble.stacking import TrainedEnsemble
from packages.methods import ENSEMBLE_KINDS, METHOD_KINDS, FittedMethod
from packages.models.cpd import CpdModel
from packages.models.neural import NeuralTcModel

logger = logging.getLogger(__name__)


def _completion_to_dict(model) -> dict:
    kind = "neural" if isinstance(model, NeuralTcModel) else "cpd"
    return {"kind": kind, "model": model.to_dict()}


def _completion_from_dict(data: dict):
    if data["kind"] == "neural":
        return NeuralTcModel.from_dict(data["model"])
    return CpdModel.from_dict(data["model"])


def model_to_dict(fitted: FittedMethod, space: DesignSpace) -> dict:
    if fitted.kind in ENSEMBLE_KINDS:
        ensemble: TrainedEnsemble = fitted.predictor
        payload = {"members": [_completion_to_dict(m) for m in ensemble.members],
                   "labels": list(ensemble.labels),
                   "forest": ensemble.forest.to_dict()}
    else:
        payload = fitted.predictor.to_dict()
    return {
        "schema_version": SCHEMA_VERSION,
        "name": fitted.name,
        "kind": fitted.kind,
        "shape": fitted.shape.as_list(),
        "space": space.to_dict(),
        "payload": payload,
    }


def model_from_dict(data: dict) -> Tuple[FittedMethod, DesignSpace]:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataFormatError(f"model schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
    kind = data.get("kind")
    if kind not in METHOD_KINDS:
        raise DataFormatError(f"unknown model kind {kind!r}")
    payload = data["payload"]
    if kind in ENSEMBLE_KINDS:
        predictor = TrainedEnsemble(tuple(_completion_from_dict(m) for m in payload["members"]),
                                    tuple(payload["labels"]), Forest.from_dict(payload["forest"]))
    elif kind == "gp":
        predictor = GpCellRegressor.from_dict(payload)
    elif kind == "neural":
        predictor = NeuralTcModel.from_dict(payload)
    else:
        predictor = CpdModel.from_dict(payload)
    space = DesignSpace.from_dict(data["space"])
    if predictor.shape.as_list() != list(data["shape"]) or space.shape != predictor.shape:
        raise DataFormatError(f"model shape {list(data['shape'])} does not match its payload")
    return FittedMethod(str(data.get("name", kind)), kind, predictor), space


def save_model(fitted: FittedMethod, space: DesignSpace, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(model_to_dict(fitted, space), fh)
            fh.write("\n")
    except OSError as e:
        raise LatticompError(f"cannot write {path}: {e}") from e
    logger.info("model %s saved to %s", fitted.name, path)


def load_model(path: str) -> Tuple[FittedMethod, DesignSpace]:
    """Read a model artifact written by save_model.

    Args:
        path: JSON file path.

    Returns:
        Tuple of (fitted method, design space it was trained over).

    Raises:
        DataFormatError: missing file, invalid JSON, or an unsupported or malformed document.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as e:
        raise DataFormatError(f"{path}: file not found") from e
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from e
    try:
        return model_from_dict(data)
    except (KeyError, TypeError) as e:
        raise DataFormatError(f"{path}: malformed model artifact ({e})") from e
