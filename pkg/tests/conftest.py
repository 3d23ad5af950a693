import numpy as np
import pytest

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def lorentzian(x):
    """Unit-norm test vector sqrt(2/pi)/(1+x^2)."""
    return SQRT_2_OVER_PI / (1.0 + np.asarray(x, dtype=float) ** 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
