import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

# property tests replay the same examples on every run
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

from lmpcast import build_mpp, enumerate_regions, make_snapshot, three_bus  # noqa: E402


@pytest.fixture(scope="session")
def tri_case():
    return three_bus()


@pytest.fixture(scope="session")
def tri_snapshot(tri_case):
    return make_snapshot(tri_case)


@pytest.fixture(scope="session")
def tri_mpp(tri_snapshot):
    return build_mpp(tri_snapshot)


@pytest.fixture(scope="session")
def tri_store(tri_mpp):
    return enumerate_regions(tri_mpp)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
