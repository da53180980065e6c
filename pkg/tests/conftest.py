import numpy as np
import pytest
from hypothesis import settings, strategies as st

from ewenskit.core import FellerBits, Partition

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def partitions(draw, max_n=40):
    parts = draw(st.lists(st.integers(1, max_n), min_size=1, max_size=12))
    return Partition.from_parts(parts)


@st.composite
def bit_strings(draw, max_n=14, leading_one=True):
    n = draw(st.integers(1, max_n))
    bits = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if leading_one:
        bits[0] = 1
    return FellerBits.of(bits)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion(capsys):
    """Print a PASS/FAIL line for an acceptance criterion and keep it for the summary."""

    def record(number: int, result) -> None:
        line = f"criterion {number:>2}: {result.line()} [{result.seconds:.1f}s]"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
