import numpy as np
import pytest

from elastomatch.material import ElasticMaterial


@pytest.fixture
def mat1():
    """The nearly incompressible material at the low frequency."""
    return ElasticMaterial.from_engineering(1.0, 3.0, 0.475)


@pytest.fixture
def mat20():
    return ElasticMaterial.from_engineering(20.0, 3.0, 0.475)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
