import numpy as np
import pytest

from hetmfgp.thermal import LaserParams, MaterialProperties

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def in625():
    return MaterialProperties.in625()


@pytest.fixture(scope="session")
def hf_laser():
    return LaserParams(0.75e-3, 0.35)


@pytest.fixture(scope="session")
def lf_laser():
    return LaserParams(0.75e-3, 0.4, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
