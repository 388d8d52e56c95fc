"""Shared fixtures: the expensive scenario runs are computed once per session."""

from __future__ import annotations

import time

import pytest

from pmsgsim.config import reference_config, replace
from pmsgsim.sim import simulate

# (criterion, passed, detail) lines collected by the acceptance module
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


class TimedRun:
    def __init__(self, cfg):
        self.cfg = cfg
        t0 = time.perf_counter()
        self.result = simulate(cfg)
        self.elapsed = time.perf_counter() - t0

    @property
    def series(self):
        return self.result.series

    @property
    def report(self):
        return self.result.report

    @property
    def audit(self):
        return self.result.audit


@pytest.fixture(scope="session")
def fault_cfg():
    return reference_config()


@pytest.fixture(scope="session")
def normal_run():
    return TimedRun(reference_config("reference_normal"))


@pytest.fixture(scope="session")
def fault_run(fault_cfg):
    return TimedRun(fault_cfg)


@pytest.fixture(scope="session")
def baseline_run(fault_cfg):
    return TimedRun(replace(fault_cfg, **{"sim.turbine_connected": False}))


@pytest.fixture(scope="session")
def fault_run_half_dt(fault_cfg):
    return TimedRun(replace(fault_cfg, **{"sim.dt_plant": fault_cfg.sim.dt_plant / 2}))


@pytest.fixture(scope="session")
def high_support_runs():
    cfg = reference_config("high_support")
    base = replace(cfg, **{"sim.turbine_connected": False})
    return TimedRun(base), TimedRun(cfg)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
