import logging

import numpy as np
import pytest

from kinetic_selfsim.config import get_settings
from kinetic_selfsim.densities import GaussianMixture
from kinetic_selfsim.grid import GridSpec


@pytest.fixture
def grid16() -> GridSpec:
    return GridSpec(n=16, extent=4.0)


@pytest.fixture
def grid32() -> GridSpec:
    return GridSpec(n=32, extent=6.0)


@pytest.fixture
def maxwellian() -> GaussianMixture:
    return GaussianMixture.maxwellian()


@pytest.fixture
def two_gaussian() -> GaussianMixture:
    return GaussianMixture(
        centers=[[-0.8, 0.0, 0.0], [0.8, 0.3, 0.0]], widths=[0.7, 0.9], weights=[0.6, 0.4]
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """Keep every test independent of the caller's environment and .env file."""
    for key in ("KINETIC_SELFSIM_THREADS", "KINETIC_SELFSIM_LOG_LEVEL", "KINETIC_SELFSIM_LOG_FORMAT", "KINETIC_SELFSIM_OUT"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def propagate_package_logs():
    """configure_logging detaches the package logger; caplog listens on the root."""
    package_logger = logging.getLogger("kinetic_selfsim")
    yield
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
    package_logger.propagate = True
    package_logger.setLevel(logging.NOTSET)
