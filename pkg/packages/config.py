"""JSON run configs for the CLI commands.

Every config carries `schema_version: 1`. Keys a command does not know are
rejected with their dotted path, e.g. `dataset.path: unknown field`.
"""
import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

from common import ConfigError, DataFormatError, build_dataclass
from packages.Constants import (BIAS_EXPERIMENTS, DEFAULT_BASE_SEED, DEFAULT_ITERATIONS, DEFAULT_TRAIN_SIZES,
                                SCHEMA_VERSION)
from packages.dataio.synthetic import SyntheticSpec
from packages.methods import MethodSpec, parse_method, parse_methods

COMMANDS = ("generate", "uniform", "bias", "train", "predict")

_COMMON_KEYS = {"schema_version", "seed", "output_dir"}
_COMMAND_KEYS = {
    "generate": {"synthetic"},
    "uniform": {"dataset", "methods", "train_sizes", "iterations", "record_timings"},
    "bias": {"dataset", "methods", "e_nums", "iterations", "fix_quotas", "quota_source", "record_timings"},
    "train": {"dataset", "method"},
    "predict": {"model", "dataset"},
}


@dataclass(frozen=True)
class DatasetSource:
    """Either a CSV path or a synthetic spec (the default)."""

    csv: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None

    def describe(self) -> str:
        return self.csv if self.csv is not None else f"synthetic {list(self.synthetic.shape)}"


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = DEFAULT_BASE_SEED
    output_dir: Optional[str] = None
    dataset: Optional[DatasetSource] = None
    synthetic: Optional[SyntheticSpec] = None
    methods: Tuple[MethodSpec, ...] = ()
    method: Optional[MethodSpec] = None
    train_sizes: Tuple[int, ...] = tuple(DEFAULT_TRAIN_SIZES)
    e_nums: Tuple[int, ...] = tuple(BIAS_EXPERIMENTS)
    iterations: int = DEFAULT_ITERATIONS
    fix_quotas: bool = False
    quota_source: str = "drawn"
    record_timings: bool = False
    model: Optional[str] = None
    raw: dict = field(default_factory=dict, compare=False)


def _parse_synthetic(data, where: str, seed: int) -> SyntheticSpec:
    """The synthetic seed follows the run seed unless the block sets its own."""
    data = dict(data or {})
    if "shape" in data and isinstance(data["shape"], list):
        data["shape"] = tuple(data["shape"])
    return build_dataclass(SyntheticSpec, data, where, **({} if "seed" in data else {"seed": seed}))


def _parse_dataset(data, where: str, seed: int, required_csv: bool = False) -> DatasetSource:
    if data is None:
        if required_csv:
            raise ConfigError(f"{where}: a dataset CSV path is required")
        return DatasetSource(synthetic=_parse_synthetic(None, f"{where}.synthetic", seed))
    if isinstance(data, str):
        data = {"csv": data}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a CSV path or an object")
    unknown = sorted(set(data) - {"csv", "synthetic"})
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown field")
    if ("csv" in data) == ("synthetic" in data):
        raise ConfigError(f"{where}: give exactly one of 'csv' or 'synthetic'")
    if "csv" in data:
        return DatasetSource(csv=str(data["csv"]))
    if required_csv:
        raise ConfigError(f"{where}: a dataset CSV path is required")
    return DatasetSource(synthetic=_parse_synthetic(data["synthetic"], f"{where}.synthetic", seed))


def _int_list(value, where: str) -> Tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of integers")
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_run_config(data: dict, command: str, seed_override: Optional[int] = None) -> RunConfig:
    """seed_override (the --seed flag) replaces the config seed before anything is derived from it."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    unknown = sorted(set(data) - _COMMON_KEYS - _COMMAND_KEYS[command])
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field for command {command!r}")

    seed = int(data.get("seed", DEFAULT_BASE_SEED)) if seed_override is None else int(seed_override)
    options = {"command": command, "seed": seed, "output_dir": data.get("output_dir"), "raw": data}
    if command == "generate":
        options["synthetic"] = _parse_synthetic(data.get("synthetic"), "synthetic", seed)
    elif command in ("uniform", "bias"):
        options["dataset"] = _parse_dataset(data.get("dataset"), "dataset", seed)
        options["methods"] = parse_methods(data.get("methods") or ["ensemble", "gp"])
        options["iterations"] = int(data.get("iterations", DEFAULT_ITERATIONS))
        options["record_timings"] = bool(data.get("record_timings", False))
        if options["iterations"] < 1:
            raise ConfigError(f"iterations must be >= 1, got {options['iterations']}")
        if command == "uniform":
            if "train_sizes" in data:
                options["train_sizes"] = _int_list(data["train_sizes"], "train_sizes")
        else:
            if "e_nums" in data:
                options["e_nums"] = _int_list(data["e_nums"], "e_nums")
                bad = [e for e in options["e_nums"] if e not in BIAS_EXPERIMENTS]
                if bad:
                    raise ConfigError(f"e_nums: {bad[0]} is not an experiment number in 1..10")
            options["fix_quotas"] = bool(data.get("fix_quotas", False))
            options["quota_source"] = str(data.get("quota_source", "drawn"))
            if options["quota_source"] not in ("drawn", "reference"):
                raise ConfigError(f"quota_source must be 'drawn' or 'reference', got {options['quota_source']!r}")
    elif command == "train":
        options["dataset"] = _parse_dataset(data.get("dataset"), "dataset", seed, required_csv=True)
        options["method"] = parse_method(data.get("method", "ensemble"), "method")
    else:
        if not data.get("model"):
            raise ConfigError("model: path to a saved model is required")
        options["model"] = str(data["model"])
        if data.get("dataset") is not None:
            options["dataset"] = _parse_dataset(data["dataset"], "dataset", seed, required_csv=True)
    return RunConfig(**options)


def load_run_config(path: str, command: str, seed_override: Optional[int] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"{path}: config file not found") from e
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from e
    return parse_run_config(data, command, seed_override)
