import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pmelab import BoundaryData, SolverConfig, build_cylinder

settings.register_profile(
    "pmelab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("pmelab")


@pytest.fixture
def cfg():
    return SolverConfig(m=2.0)


@pytest.fixture
def unit_cylinder():
    return build_cylinder(0.0, 1.0, 0.0, 0.25, 32, 32)


@pytest.fixture
def hump_data(unit_cylinder):
    return BoundaryData.from_function(unit_cylinder, lambda x, t: 0.3 + 0.5 * np.sin(np.pi * x) * np.exp(-t), 2.0)
