import numpy as np
import pytest

from roughlsm import Medium


@pytest.fixture(scope="session")
def desk_medium() -> Medium:
    """Moderate-contrast medium used by the quick test problems."""
    return Medium(1.0, 2.0)


@pytest.fixture(scope="session")
def deep_medium() -> Medium:
    """High-contrast medium matching the full-size experiment settings."""
    return Medium(1.0, 10.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
