import pytest
from hypothesis import strategies as st

from sharedbuf import SwitchConfig, Trace


@st.composite
def traces(draw, max_n=4, max_B=8, max_m=20, max_gap=2):
    n = draw(st.integers(1, max_n))
    B = draw(st.integers(1, max_B))
    m = draw(st.integers(0, max_m))
    slot = 0
    arrivals = []
    for _ in range(m):
        slot += draw(st.integers(0, max_gap))
        arrivals.append((slot, draw(st.integers(1, n))))
    return Trace.from_arrivals(SwitchConfig(n, B), arrivals)


@pytest.fixture
def n2b4():
    return SwitchConfig(2, 4)


# One PASS/FAIL line per acceptance criterion, collected by test_acceptance
# and repeated at the end of the run so it survives output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
