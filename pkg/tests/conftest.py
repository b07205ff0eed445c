import sys
from pathlib import Path

import pytest

from richpddl.parser import parse_domain, parse_plan, parse_problem

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name):
    return FIXTURES / name


def load_domain(name):
    return parse_domain(fixture_path(name).read_text(), filename=name)


def load_problem(name="turn-problem.pddl"):
    return parse_problem(fixture_path(name).read_text(), filename=name)


def load_plan(name):
    return parse_plan(fixture_path(name).read_text(), filename=name)


@pytest.fixture(scope="session")
def rich():
    return load_domain("turn-rich.pddl")


@pytest.fixture(scope="session")
def conservative():
    return load_domain("turn-conservative.pddl")


@pytest.fixture(scope="session")
def hand_decomposed():
    return load_domain("turn-decomposed.pddl")


@pytest.fixture(scope="session")
def problem():
    return load_problem()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
