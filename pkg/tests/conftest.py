import functools
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hardhex import build_grid  # noqa: E402
from hardhex.landscape import enumerate_states  # noqa: E402


@functools.lru_cache(maxsize=None)
def index_for(K, L):
    return enumerate_states(build_grid((K, L)))


@pytest.fixture(scope="session")
def idx21():
    return index_for(2, 1)


@pytest.fixture(scope="session")
def idx22():
    return index_for(2, 2)


@pytest.fixture(scope="session")
def idx31():
    return index_for(3, 1)


# lines recorded by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
