import pytest

from trendbandit import TrendFunction

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def unit_trend():
    return TrendFunction.constant(1.0, horizon_cap=20000)


@pytest.fixture
def log_trend():
    return TrendFunction.log_decreasing(-6.65, 9.57, horizon_cap=200)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
