import numpy as np
import pytest

from hypoprop.model import BBox, Proposal

# lines printed by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def square(h, w, r0, c0, size):
    m = np.zeros((h, w), dtype=bool)
    m[r0 : r0 + size, c0 : c0 + size] = True
    return m


def prop(x0, y0, x1, y1, frame=1, pid=0, conf=0.9):
    return Proposal(BBox(x0, y0, x1, y1), conf, frame, pid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
