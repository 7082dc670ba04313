import numpy as np
import pytest

from slmc.streams import RandomStream

# Acceptance tests append (number, passed, detail) here; the summary hook
# prints one line per criterion at the end of the session.
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


@pytest.fixture
def stream():
    return RandomStream(12345)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_spd(rng, d, lo=0.5, hi=5.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (Q * np.linspace(lo, hi, d)) @ Q.T


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
