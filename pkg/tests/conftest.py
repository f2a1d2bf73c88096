import numpy as np
import pytest

from ocon.dataset import filter_nulls
from ocon.synthetic import synthetic_records


@pytest.fixture(scope="session")
def raw_records():
    return synthetic_records(seed=0)


@pytest.fixture(scope="session")
def records(raw_records):
    kept, _ = filter_nulls(raw_records)
    return kept


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
