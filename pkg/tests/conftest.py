import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from resopt import fixtures
from resopt.hydroseries import DAYS_IN_WATER_YEAR, DailySeries
from resopt.reservoir import ReservoirConfig
from resopt.thresholds import FloodThreshold, MefSchedule, flood_threshold, percent_of_maf

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TEN_DAY_START = dt.date(2001, 6, 1)
TEN_DAY_INFLOW = [0.0, 2.0, 40.0, 200.0, 3.0, 0.0, 60.0, 1.0, 0.0, 5.0]


def constant_cycle(value: float) -> np.ndarray:
    return np.full(DAYS_IN_WATER_YEAR, float(value))


@pytest.fixture(scope="session")
def ten_day_cfg() -> ReservoirConfig:
    """Reservoir of tests/oracles/ten_day_trace.py."""
    return ReservoirConfig(
        mef=MefSchedule(constant_cycle(5.0), "test"),
        flood=FloodThreshold(30.0),
        demand=constant_cycle(12.0),
        elevation_storage=((0.0, 10.0), (100.0, 50.0)),
        live_capacity=100.0,
        hp_release_cap=20.0,
        hp_power_cap=0.05,
    )


@pytest.fixture(scope="session")
def ten_day_inflow() -> DailySeries:
    return DailySeries(TEN_DAY_START, TEN_DAY_INFLOW)


@pytest.fixture(scope="session")
def ns_history() -> DailySeries:
    return fixtures.ns_like_inflow()


@pytest.fixture(scope="session")
def ns_cfg(ns_history) -> ReservoirConfig:
    return ReservoirConfig(
        mef=percent_of_maf(ns_history, 0.3),
        flood=flood_threshold(fixtures.ns_like_releases(ns_history)),
        demand=fixtures.ns_like_demand(),
        elevation_storage=fixtures.NS_LIKE_HEAD_CURVE,
        max_inflow=float(ns_history.values.max()),
    )


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance criterion as a PASS/FAIL line and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
