import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lanemanifold.constructions import glue, smooth_c1, smooth_cinf  # noqa: E402
from lanemanifold.model_manifold import make_profile  # noqa: E402


@pytest.fixture(scope="session")
def euclidean():
    return make_profile("euclidean")


@pytest.fixture(scope="session")
def hyperbolic():
    return make_profile("hyperbolic")


@pytest.fixture(scope="session")
def shifted2():
    return make_profile("shifted_power", {"alpha": 2.0})


@pytest.fixture(scope="session")
def glued_final():
    """The (n, alpha, q) = (3, 2, 2) glued profile after both smoothing stages."""
    return smooth_cinf(smooth_c1(glue(3, 2.0, 2.0)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
