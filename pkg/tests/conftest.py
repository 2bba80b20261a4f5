import numpy as np
import pytest

from bmolab.grid import make_grid
from bmolab.luxembourg import clear_cache

CRITERIA: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    """Store the outcome of an acceptance criterion; one line each in the summary."""
    prev = CRITERIA.get(number)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}"
    CRITERIA[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _fresh_cache():
    clear_cache()
    yield


@pytest.fixture(scope="session")
def g1():
    return make_grid(1, 1.0, 1024)


@pytest.fixture(scope="session")
def g4096():
    return make_grid(1, 1.0, 4096)


@pytest.fixture(scope="session")
def g2():
    return make_grid(2, 1.0, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
