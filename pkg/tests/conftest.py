import numpy as np
import pytest

from packages.dataio.synthetic import SyntheticSpec, generate_synthetic
from packages.models.cpd import CpdModel
from packages.tensor.core import Shape, dense_to_observations


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic():
    """Default 5 x 27 x 2 synthetic dataset: (all observations, design space)."""
    tensor, space = generate_synthetic(SyntheticSpec())
    return dense_to_observations(tensor), space


@pytest.fixture(scope="session")
def rank2_truth():
    """Exactly rank-2 tensor of shape [5, 27, 2] built from fixed CP factors."""
    gen = np.random.default_rng(7)
    shape = Shape((5, 27, 2))
    factors = tuple(gen.uniform(0.5, 1.5, size=(d, 2)) for d in shape.dims)
    return CpdModel(shape, 2, factors)
