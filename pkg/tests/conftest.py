from __future__ import annotations

import numpy as np
import pytest

from meanshift_lab import SamplingDistribution, WeightFunction
from meanshift_lab.population import PopulationDistribution


@pytest.fixture(scope="session")
def normal_w():
    return WeightFunction.normal(1.0)


@pytest.fixture(scope="session")
def std_normal_pop(normal_w):
    return PopulationDistribution.from_base(SamplingDistribution.normal(), w=normal_w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# ------------------------------------------------------------ acceptance report

_REPORT_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_REPORT_KEY] = {}


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects (passed, detail) entries per criterion; printed after the run."""
    return request.config.stash[_REPORT_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = config.stash.get(_REPORT_KEY, {})
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(report, key=lambda k: int(k.split()[0])):
        entries = report[key]
        ok = all(e[0] for e in entries)
        detail = "; ".join(e[1] for e in entries)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
