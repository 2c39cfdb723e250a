import pytest

from helpers import ACCEPTANCE_LINES, QUADRATIC


@pytest.fixture
def t():
    return QUADRATIC


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
