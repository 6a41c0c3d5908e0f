import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rkcompact.spaces import SpaceDescriptor

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def bergman():
    return SpaceDescriptor.bergman()


@pytest.fixture(scope="session")
def fock():
    return SpaceDescriptor.fock()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
