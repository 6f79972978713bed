import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rtitrack.config import RunConfig
from rtitrack.simulator import Scenario, TargetScript, perimeter_sensors

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CACHE = os.environ.get("RTI_CACHE_DIR")


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Projection cache shared by the whole session (or RTI_CACHE_DIR when set)."""
    return CACHE or str(tmp_path_factory.mktemp("projections"))


def small_config(**tracking) -> RunConfig:
    bounds = (0.0, 0.0, 4.0, 4.0)
    cfg = RunConfig(
        sensors=tuple(perimeter_sensors(bounds, 16)), bounds=bounds, channels=(11, 18, 26),
        tx_power={11: 4.5, 18: 3.8, 26: 3.0},
    )
    return cfg.with_tracking(**tracking) if tracking else cfg


@pytest.fixture
def small_cfg():
    return small_config()


def walk_scenario(cfg=None, **kw) -> Scenario:
    """One target entering from the west edge, crossing, and leaving east."""
    cfg = cfg or small_config()
    kw.setdefault("noise_db", 0.5)
    kw.setdefault("drop_rate", 0.0)
    kw.setdefault("calibration_frames", 60)
    t = TargetScript(10, 60, ((0.3, 2.0), (3.7, 2.0)), 0.7)
    return Scenario(cfg, (t,), 80, name="walk", **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
