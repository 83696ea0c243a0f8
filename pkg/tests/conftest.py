from fractions import Fraction

import pytest

from chiralbounds import GradedModule, virasoro, w3

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def w3_vacuum_c3():
    """Reduced W3 vacuum at c = 3, quotient built to level 11."""
    return GradedModule.vacuum(w3(3)).build(11)


@pytest.fixture(scope="session")
def w3_verma_c3():
    """Full W3 Verma span at c = 3, h = w = 0, quotient built to level 6."""
    return GradedModule(w3(3)).build(6)


@pytest.fixture(scope="session")
def vir_c32():
    return GradedModule(virasoro(Fraction(3, 2)), Fraction(1, 5)).build(8)
