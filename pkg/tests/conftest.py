from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from helpers import ACCEPTANCE
from storagemdp.datasets import bundled_scenario
from storagemdp.market import DemandParams, MarketParams, SlopeTable

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def scenario():
    return bundled_scenario()


@pytest.fixture(scope="session")
def day(scenario):
    """First synthetic day, welfare-max, C = 20, n_soc = 20."""
    return scenario.instance(0, 288)


@pytest.fixture(scope="session")
def market():
    return MarketParams(DemandParams(10.0, 0.2, 240.0), SlopeTable.table_one(), 0.5)
