import numpy as np
import pytest

from sentinel.core import GaussianSpec, default_task


@pytest.fixture
def traffic():
    return GaussianSpec(16.0, 2.0)


@pytest.fixture
def traffic_task(traffic):
    return default_task(traffic, n=10)


@pytest.fixture
def gen():
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
