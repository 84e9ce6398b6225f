import json
import os

import pytest
from hypothesis import HealthCheck, settings

from laxscatter.field import make_grid, standard_potential
from laxscatter.lax import build_qdnls_spec

settings.register_profile("laxscatter", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("laxscatter")

HERE = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def frozen():
    with open(os.path.join(HERE, "oracle", "frozen.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def grid():
    return make_grid(20.0, 1024)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(20.0, 256)


@pytest.fixture(scope="session")
def bump_pair(grid):
    return (standard_potential("bump", 0.3, 2.0, 0.0, grid, "q"),
            standard_potential("bump", 0.3j, 2.0, 0.2, grid, "r"))


@pytest.fixture(scope="session")
def zero_pair(grid):
    z = standard_potential("gaussian", 0.0, 1.0, 0.0, grid, "0")
    return z, z


@pytest.fixture(scope="session")
def bump_spec(bump_pair):
    return build_qdnls_spec(*bump_pair, 3.0)


@pytest.fixture(scope="session")
def zero_spec(zero_pair):
    return build_qdnls_spec(*zero_pair, 2.0)


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def record_criterion():
    """Store one pass/fail line per acceptance criterion for the terminal summary."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
