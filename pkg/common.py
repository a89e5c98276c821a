"""Shared helpers: environment, logging, error types and seed derivation."""
import dataclasses
import hashlib
import json
import logging
import os
from typing import Optional

import numpy as np
from dotenv import load_dotenv

load_dotenv()

UINT64_MASK = (1 << 64) - 1


class LatticompError(Exception):
    """Base class for every error raised by the toolkit."""


class ShapeError(LatticompError, ValueError):
    """Bad shape, or an index outside the shape."""


class ObservationError(LatticompError, ValueError):
    """Malformed observation sets (duplicates, missing or empty entries)."""


class ConfigError(LatticompError, ValueError):
    """Run config or hyperparameters violate the schema."""


class TrainingError(LatticompError):
    """Training diverged or could not start."""


class NumericalError(LatticompError):
    """Linear algebra failure (e.g. a Gram matrix that is not positive definite)."""


class DataFormatError(LatticompError, ValueError):
    """A CSV or JSON artifact could not be parsed."""


class _TagFormatter(logging.Formatter):
    def format(self, record):
        record.tag = record.levelname.lower()
        return super().format(record)


def configure_logging(verbose: bool = True) -> None:
    """Install the console handler once, using the [info]/[warn] tag style."""
    level_name = os.environ.get("LATTICOMP_LOG_LEVEL")
    if level_name:
        level = getattr(logging, level_name.upper(), logging.INFO)
    else:
        level = logging.INFO if verbose else logging.WARNING

    root = logging.getLogger()
    if not any(getattr(h, "_latticomp", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(_TagFormatter("[%(tag)s] %(name)s: %(message)s"))
        handler._latticomp = True  # pylint: disable=protected-access
        root.addHandler(handler)
    root.setLevel(level)


def get_out_dir(cli_value: Optional[str]) -> str:
    """Return the output directory; LATTICOMP_OUT wins over the --out flag."""
    return os.environ.get("LATTICOMP_OUT") or cli_value or "out"


def get_default_jobs() -> int:
    """Return LATTICOMP_JOBS if set, otherwise the available core count."""
    raw = os.environ.get("LATTICOMP_JOBS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError as e:
            raise ConfigError(f"LATTICOMP_JOBS must be an integer, got {raw!r}") from e
    return os.cpu_count() or 1


def hash_label(label: str) -> int:
    """Stable 64-bit hash of a text label (blake2b, little endian)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(base_seed: int, *labels) -> int:
    """XOR the base seed with the hash of the joined labels."""
    key = ":".join(str(label) for label in labels)
    return (int(base_seed) ^ hash_label(key)) & UINT64_MASK


def derive_rng(seed: int, *ordinals: int) -> np.random.Generator:
    """Independent PRNG stream for (seed, ordinal...) that does not depend on call order."""
    entropy = [int(seed) & UINT64_MASK] + [int(o) for o in ordinals]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def build_dataclass(cls, data, where: str, **overrides):
    """Instantiate a dataclass from a JSON mapping, rejecting unknown keys by dotted path."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown field")
    try:
        return cls(**{**data, **overrides})
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON rendering of a config dict."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
