"""Synthetic lattice-design datasets with the search-space geometry of the real study.

Default layout: geometry (5, categorical) x design configuration (27, ordinal)
x property (2: E and E_tilde = E / m), i.e. 54 values per geometry slice and
270 cells in total.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from common import ConfigError, derive_rng
from packages.Constants import (CELLS_PER_SLICE, DEFAULT_LATENT_RANK, DEFAULT_MASS_VARIATION,
                                DEFAULT_NOISE_STD, DEFAULT_SYNTHETIC_SHAPE, GEOMETRY_MODE_NAME,
                                GEOMETRY_NAMES, PROPERTY_MODE_NAME, PROPERTY_NAMES)
from packages.dataio.schema import DesignSpace
from packages.tensor.core import DenseTensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    shape: Tuple[int, ...] = tuple(DEFAULT_SYNTHETIC_SHAPE)
    latent_rank: int = DEFAULT_LATENT_RANK
    noise_std: float = DEFAULT_NOISE_STD
    mass_variation: float = DEFAULT_MASS_VARIATION
    seed: int = 0

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) < 3:
            raise ConfigError(f"synthetic shape needs geometry, design and property modes, got {list(shape)}")
        if shape[0] != len(GEOMETRY_NAMES):
            raise ConfigError(f"geometry mode must have {len(GEOMETRY_NAMES)} levels, got {shape[0]}")
        if shape[-1] != len(PROPERTY_NAMES):
            raise ConfigError(f"property mode must have {len(PROPERTY_NAMES)} levels, got {shape[-1]}")
        if any(d < 1 for d in shape) or int(np.prod(shape[1:])) != CELLS_PER_SLICE:
            raise ConfigError(f"each geometry slice must hold {CELLS_PER_SLICE} values; "
                              f"shape {list(shape)} gives {int(np.prod(shape[1:]))}")
        if int(self.latent_rank) < 1:
            raise ConfigError(f"latent_rank must be >= 1, got {self.latent_rank}")
        if not self.noise_std >= 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not self.mass_variation >= 0:
            raise ConfigError(f"mass_variation must be >= 0, got {self.mass_variation}")


def design_space_for(spec: SyntheticSpec) -> DesignSpace:
    design_dims = spec.shape[1:-1]
    if len(design_dims) == 1:
        design_names = ["design"]
    else:
        design_names = [f"design_{i + 1}" for i in range(len(design_dims))]
    names = (GEOMETRY_MODE_NAME, *design_names, PROPERTY_MODE_NAME)
    kinds = ("categorical", *["ordinal"] * len(design_dims), "categorical")
    levels = (tuple(GEOMETRY_NAMES), *[tuple(str(i) for i in range(d)) for d in design_dims],
              tuple(PROPERTY_NAMES))
    return DesignSpace(names, kinds, levels, property_mode=len(names) - 1, slice_mode=0)


def _positive_factors(rng: np.random.Generator, dims: List[int], rank: int) -> List[np.ndarray]:
    """Geometry factor uniform in [0.5, 1.5]; ordinal factors smooth increasing cumulative sums in [0.2, 1.2]."""
    factors = [rng.uniform(0.5, 1.5, size=(dims[0], rank))]
    for d in dims[1:]:
        steps = np.cumsum(rng.uniform(0.0, 1.0, size=(d, rank)), axis=0)
        factors.append(0.2 + steps / steps[-1])
    return factors


def _cp_full(factors: List[np.ndarray]) -> np.ndarray:
    rank = factors[0].shape[1]
    out = 0.0
    for r in range(rank):
        component = factors[0][:, r]
        for f in factors[1:]:
            component = np.multiply.outer(component, f[:, r])
        out = out + component
    return out


def generate_components(spec: SyntheticSpec) -> Dict[str, np.ndarray]:
    """Noise-free E, mass and E_tilde over the geometry x design modes."""
    rng = derive_rng(spec.seed, 0)
    dims = list(spec.shape[:-1])
    latent = _cp_full(_positive_factors(rng, dims, spec.latent_rank))
    modulus = latent / latent.mean()
    mass_latent = _cp_full(_positive_factors(rng, dims, 1))
    mass = np.exp(spec.mass_variation * (mass_latent / mass_latent.mean() - 1.0))
    return {"E": modulus, "mass": mass, "E_tilde": modulus / mass}


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> Tuple[DenseTensor, DesignSpace]:
    """Ground truth tensor (property mode last: E then E_tilde) and its design space."""
    parts = generate_components(spec)
    clean = np.stack([parts["E"], parts["E_tilde"]], axis=-1)
    noisy = clean.copy()
    if spec.noise_std > 0:
        rng = derive_rng(spec.seed, 1)
        for p in range(clean.shape[-1]):
            sigma = spec.noise_std * clean[..., p].std()
            noisy[..., p] += rng.normal(0.0, sigma, size=clean[..., p].shape)
        # keep E strictly positive
        floor = 0.5 * parts["E"].min()
        noisy[..., 0] = np.maximum(noisy[..., 0], floor)
    logger.debug("synthetic tensor %s, rank %d, noise %.3g", list(spec.shape), spec.latent_rank, spec.noise_std)
    return DenseTensor.from_array(noisy), design_space_for(spec)
