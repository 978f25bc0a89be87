from importlib import resources

import pytest

from lcn.model import ground
from lcn.parser import load, parse_program


def data_path(name: str) -> str:
    return str(resources.files("lcn") / "data" / name)


def ground_text(text: str):
    return ground(parse_program(text))


def ground_file(name: str):
    return ground(load(data_path(name)))


@pytest.fixture
def appendix_a():
    return ground_file("appendix_a.lcn")


@pytest.fixture
def xor_program():
    return ground_file("xor.lcn")


@pytest.fixture
def incompat():
    return ground_file("incompat.lcn")


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
