from pathlib import Path

import numpy as np
import pytest

from cauchy_ahlfors.grid import GridSpec
from cauchy_ahlfors.tensor import Metric
from cauchy_ahlfors import testing


@pytest.fixture(scope="session")
def grid2():
    return GridSpec(2, (32, 32))


@pytest.fixture(scope="session")
def grid3():
    return GridSpec(3, (16, 16, 16))


@pytest.fixture(scope="session")
def flat2(grid2):
    return Metric.flat(grid2)


@pytest.fixture(scope="session")
def flat3(grid3):
    return Metric.flat(grid3)


@pytest.fixture(scope="session")
def perturbed3():
    return testing.perturbed_3d(24)


@pytest.fixture(scope="session")
def perturbed3_small():
    return testing.perturbed_3d(16)


@pytest.fixture(scope="session")
def perturbed2():
    return testing.perturbed_2d(32)


@pytest.fixture(scope="session")
def conformal2():
    return testing.conformal_2d(32)


CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


def sup(a):
    return float(np.max(np.abs(np.asarray(a))))


ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects ``criterion -> [(clause, passed, detail)]`` for the summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        clauses = ACCEPTANCE_LINES[number]
        ok = all(passed for _, passed, _ in clauses)
        detail = "; ".join(f"{name}: {d}" + ("" if p else " [FAIL]") for name, p, d in clauses)
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {detail}")
