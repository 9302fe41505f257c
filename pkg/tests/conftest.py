import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hvdc_faultloc.dataset import SynthConfig, default_scenario_grid, generate_synthetic


@pytest.fixture(scope="session")
def default_cfg():
    return SynthConfig(random_seed=7)


@pytest.fixture(scope="session")
def current_ds(default_cfg):
    return generate_synthetic(default_cfg, default_scenario_grid(default_cfg), "current")


@pytest.fixture(scope="session")
def voltage_ds(default_cfg):
    return generate_synthetic(default_cfg, default_scenario_grid(default_cfg), "voltage")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
