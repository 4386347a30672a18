import numpy as np
import pytest

from awbench.actuator import ActuatorParams
from awbench.benchmark import default_scenario, remus_yaw_plant
from awbench.simulation import SimConfig


@pytest.fixture
def remus():
    return remus_yaw_plant()


@pytest.fixture
def actuator():
    return ActuatorParams()


@pytest.fixture
def scenario():
    return default_scenario()


@pytest.fixture
def sim_config():
    return SimConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
