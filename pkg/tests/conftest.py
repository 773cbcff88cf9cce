import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bn2o.model import Bn2oNetwork  # noqa: E402
from bn2o.netgen import small_network  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_net():
    return small_network(8, 12, seed=3)


@pytest.fixture
def chain_net():
    """One disease (prior 0.5) with one finding (q = 0.5, no leak)."""
    return Bn2oNetwork.build([0.5], [0.0], [[0]], [[0.5]])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
