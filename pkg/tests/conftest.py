import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from blv import zoo

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def s3():
    return zoo.symmetric_group_model(3)


@pytest.fixture(scope="session")
def s4():
    return zoo.symmetric_group_model(4)


@pytest.fixture(scope="session")
def s3_coords(s3):
    return zoo.coordinate_maps(s3)


@pytest.fixture(scope="session")
def s4_coords(s4):
    return zoo.coordinate_maps(s4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
