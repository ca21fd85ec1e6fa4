from pathlib import Path

import pytest

DATA = Path(__file__).resolve().parents[1] / "src" / "epispatial" / "data"
SCENARIOS = DATA / "scenarios"
DEFAULT_SUITE = DATA / "default_suite.ini"


@pytest.fixture
def scenario_path():
    def get(name):
        return SCENARIOS / f"{name}.ini"

    return get


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
