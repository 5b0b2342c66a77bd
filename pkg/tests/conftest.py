import numpy as np
import pytest

from gazekit.binning import BinScheme
from gazekit.datasets import SyntheticConfig, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_scheme():
    return BinScheme(-15.0, 15.0, 6)


@pytest.fixture(scope="session")
def tiny_synthetic():
    """120 clean synthetic samples over 4 subjects, shared across tests."""
    return generate_synthetic(
        SyntheticConfig(n_samples=120, image_size=64, noise_level=0.0, seed=7))
