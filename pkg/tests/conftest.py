import pytest

from helpers import ACCEPTANCE_LINES, load_plant
from smmpc import collect_record


@pytest.fixture(scope="session")
def desk_plant():
    return load_plant("desk_siso_plant.json")


@pytest.fixture(scope="session")
def mimo_plant():
    return load_plant("desk_mimo_plant.json")


@pytest.fixture(scope="session")
def clean_record(desk_plant):
    return collect_record(desk_plant, 400, 24, None, seed=5)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
