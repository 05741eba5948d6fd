import numpy as np
import pytest

from fogslm.config import ParameterSet

# (criterion, passed, detail) lines collected by the acceptance tests
ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


@pytest.fixture(scope="session")
def params():
    return ParameterSet()


@pytest.fixture(scope="session")
def instance(params):
    return params.build()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
