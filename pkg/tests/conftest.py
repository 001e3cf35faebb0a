import numpy as np
import pytest

from iibpan.raster import Raster


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_raster(rng, bands=3, size=16, lo=0.0, hi=1.0):
    return Raster(rng.uniform(lo, hi, (bands, size, size)))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
