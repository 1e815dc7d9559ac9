from pathlib import Path

import pytest

from plci.grounding import ground
from plci.syntax import parse_database, parse_params, parse_program, resolve_parameters

DATA = Path(__file__).resolve().parents[1] / "src" / "plci" / "data"


def load(name: str) -> str:
    return (DATA / name).read_text()


def storage_db_text(employees=("john", "mary"), tanks=("t1", "t2", "t3", "t4", "t5"),
                    rooms=("r1", "r2", "r3", "r4")) -> str:
    """The storage facts restricted to the given entities (passages and in/stores filtered to match)."""
    full = parse_database(load("storage.db"))
    keep = set(employees) | set(tanks) | set(rooms) | {"gasoline", "water"}
    facts = [f for f in sorted(full.facts) if set(f.values()) <= keep]
    return "".join(f"{f}.\n" for f in facts)


@pytest.fixture(scope="session")
def storage_program():
    return parse_program(load("storage.plp"))


@pytest.fixture(scope="session")
def storage_db(storage_program):
    return parse_database(load("storage.db"), storage_program)


@pytest.fixture(scope="session")
def storage_params(storage_program):
    return resolve_parameters(storage_program, parse_params(load("storage.params")))


@pytest.fixture(scope="session")
def storage(storage_program, storage_db):
    return ground(storage_program, storage_db)


@pytest.fixture(scope="session")
def sprinkler():
    return ground(parse_program(load("sprinkler.plp")), parse_database(""))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
