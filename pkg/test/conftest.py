import numpy as np
import pytest

from vmtunet.core.models.models import SyntheticSpec


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec() -> SyntheticSpec:
    return SyntheticSpec(count=4, test_count=2, size=16, noise_sigma=0.0, seed=3)
