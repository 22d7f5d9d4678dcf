import pytest

from feverbot.harness import run
from feverbot.scenario import load_demo

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def demo_scenario():
    return load_demo()


@pytest.fixture(scope="session")
def demo_run(demo_scenario):
    return run(demo_scenario)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
