import random

import pytest

from cqenum.cqparse import parse_cq
from cqenum.fixtures import CYCLE4, CYCLE4_QUANTIFIED, TRIANGLE, cycle_instance


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def cycle4():
    return parse_cq(CYCLE4)


@pytest.fixture(scope="session")
def cycle4q():
    return parse_cq(CYCLE4_QUANTIFIED)


@pytest.fixture(scope="session")
def triangle():
    return parse_cq(TRIANGLE)


@pytest.fixture(scope="session")
def cyc4():
    return cycle_instance(4)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
