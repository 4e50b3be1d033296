import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from igcurv import manifold_zoo as mz

settings.register_profile("igcurv", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("igcurv")


@pytest.fixture(scope="session")
def stat3():
    return mz.random_bundle("statistical", 3, 7)


@pytest.fixture(scope="session")
def quasi3():
    return mz.random_bundle("quasi_statistical", 3, 7)


@pytest.fixture(scope="session")
def general3():
    return mz.random_bundle("general", 3, 7)


@pytest.fixture(scope="session")
def gaussian():
    return mz.gaussian_family()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
