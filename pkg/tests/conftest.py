import sys
import numpy as np
import pytest

from genrb.fom import build_convdiff_fom, build_reacdiff_fom


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running full-scale checks")


@pytest.fixture(scope="session")
def convdiff():
    return build_convdiff_fom()


@pytest.fixture(scope="session")
def convdiff_small():
    return build_convdiff_fom(nx=8, degree=2)


@pytest.fixture(scope="session")
def reacdiff():
    return build_reacdiff_fom()


@pytest.fixture(scope="session")
def reacdiff_small():
    return build_reacdiff_fom(multiplier=1, degree=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
