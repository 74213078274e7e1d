import warnings

import numpy as np
import pytest

from lanczos_filters.bidiag import bidiagonalize
from lanczos_filters.problems import add_noise, build_gravity, build_shaw, optimal_tikhonov_parameter

# The noise realization used throughout; fixed before any result was seen.
SEED = 0


class Case:
    def __init__(self, name, problem, steps=40):
        self.name = name
        self.problem = problem
        self.gkb = bidiagonalize(problem.matrix, problem.rhs, steps)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.c_opt = optimal_tikhonov_parameter(problem).c


@pytest.fixture(scope="session")
def shaw_case():
    return Case("shaw", add_noise(build_shaw(400), 1e-4, seed=SEED))


@pytest.fixture(scope="session")
def gravity_case():
    return Case("gravity", add_noise(build_gravity(200), 1e-2, seed=SEED))


@pytest.fixture(scope="session", params=["shaw", "gravity"])
def case(request, shaw_case, gravity_case):
    return shaw_case if request.param == "shaw" else gravity_case


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


class Gate:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def __init__(self):
        self.lines = {}

    def record(self, number, passed, detail):
        self.lines[number] = (bool(passed), detail)
        return bool(passed)


GATE = Gate()


@pytest.fixture(scope="session")
def gate():
    return GATE


def pytest_terminal_summary(terminalreporter):
    if not GATE.lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(GATE.lines):
        passed, detail = GATE.lines[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
