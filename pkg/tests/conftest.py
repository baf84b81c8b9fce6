import numpy as np
import pytest
from hypothesis import settings

from crpsbin.dataset import load_bundled

settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


@pytest.fixture(scope="session")
def faithful():
    return load_bundled("faithful")


@pytest.fixture(scope="session")
def mcycle():
    return load_bundled("mcycle")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_values(rng, m, kind=None):
    """Heterogeneous sample generator used across the oracle tests."""
    kind = kind if kind is not None else rng.integers(0, 4)
    if kind == 0:
        return rng.normal(size=m)
    if kind == 1:
        return rng.lognormal(sigma=1.0, size=m)
    if kind == 2:
        return rng.uniform(-5, 5, size=m)
    return np.round(rng.normal(scale=3.0, size=m))  # heavy ties
