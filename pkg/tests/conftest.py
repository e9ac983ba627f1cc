import pytest

from dsmkam.bigreal import golden_mean, make_context

# Lines collected by the acceptance module and echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ctx():
    return make_context(60)


@pytest.fixture(scope="session")
def omega(ctx):
    return golden_mean(ctx)
