import pytest

from tcmum.synthetic import desk_scenario, micro_scenario

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def micro():
    return micro_scenario()


@pytest.fixture(scope="session")
def desk():
    return desk_scenario()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
