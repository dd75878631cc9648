import numpy as np
import pytest
from hypothesis import settings

from coflow.drift import PRESETS
from coflow.flow_lattice import LatticeSpec, simulate_flow

settings.register_profile("coflow", max_examples=60, deadline=None)
settings.load_profile("coflow")


@pytest.fixture(scope="session")
def small_spec():
    return LatticeSpec(0.0, 40, 0.01, -1.0, 1.0, 0.05, margin=0.5)


@pytest.fixture(scope="session", params=sorted(PRESETS))
def small_flow(request, small_spec):
    return simulate_flow(small_spec, PRESETS[request.param], seed=11, replica=0)


@pytest.fixture
def gen():
    return np.random.default_rng(1234)
