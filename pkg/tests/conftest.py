"""Shared fixtures: the standard test coefficients and small solver grids."""

import numpy as np
import pytest

from kppfront.core.coeff import (
    PeriodicCoefficient,
    from_function,
    make_atoms,
    make_constant,
    make_delta_comb,
    make_shigesada,
)
from kppfront.core.eigen import SolverConfig
from kppfront.utils.metrics import get_metrics_tracker


@pytest.fixture(autouse=True)
def reset_metrics():
    """Every test starts from zeroed counters."""
    get_metrics_tracker().reset()
    yield


@pytest.fixture
def constant() -> PeriodicCoefficient:
    return make_constant(1.0, 1.0)


@pytest.fixture
def comb() -> PeriodicCoefficient:
    return make_delta_comb(1.0, 1.0)


@pytest.fixture
def two_atoms() -> PeriodicCoefficient:
    """Asymmetric comb: masses 0.7 and 0.3 at 0.3 and 0.55."""
    return make_atoms(1.0, 1.0, [(0.3, 0.7), (0.55, 0.3)])


@pytest.fixture
def half_patch() -> PeriodicCoefficient:
    """Level 2 on the middle half of the cell, 0 elsewhere."""
    return make_shigesada(1.0, 1.0, 0.5)


@pytest.fixture
def smooth() -> PeriodicCoefficient:
    return from_function(1.0, 1.0, lambda x: 1.0 + 0.5 * np.cos(2.0 * np.pi * x), n=1024)


@pytest.fixture
def small_cfg() -> SolverConfig:
    return SolverConfig(grid_n=512)
