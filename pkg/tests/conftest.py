"""Shared fixtures for the drift estimator tests."""

import numpy as np
import pytest

from app.core.config import Settings, get_settings
from app.core.logging import configure_logging
from app.models.dto import BasisSpec, Path, PriorConfig


@pytest.fixture(scope="session", autouse=True)
def quiet_logging():
    """Keep per-iteration debug records out of the test run."""
    configure_logging(Settings(log_level="WARNING"))


@pytest.fixture(autouse=True)
def fresh_settings():
    """Settings are cached per process; tests that touch the environment need a clean cache."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def fourier_spec():
    return BasisSpec(family="fourier", beta=1.5, j_max=6)


@pytest.fixture
def schauder_spec():
    return BasisSpec(family="schauder", beta=1.5, j_max=6)


@pytest.fixture
def fourier_prior():
    return PriorConfig.for_family("fourier")


@pytest.fixture
def random_path():
    """Brownian path with drift, 2001 points on [0, 2]."""
    rng = np.random.default_rng(20240917)
    dt = 1e-3
    steps = 0.8 * dt + np.sqrt(dt) * rng.standard_normal(2000)
    values = 0.3 + np.concatenate([[0.0], np.cumsum(steps)])
    return Path(t0=0.0, dt=dt, values=values)


@pytest.fixture
def observations():
    """Coarse observations: 41 points, spacing 0.05."""
    rng = np.random.default_rng(11)
    delta = 0.05
    values = np.concatenate([[0.1], 0.1 + np.cumsum(np.sqrt(delta) * rng.standard_normal(40))])
    return Path(t0=0.0, dt=delta, values=values)
