import math
import time

import numpy as np
import pytest

from quadsurf.claims import oracle_case
from quadsurf.fields import DomainMask, Grid
from quadsurf.freeboundary import FreeBoundaryParams, solve_quadrature_surface
from quadsurf.measures import MeasureSpec
from quadsurf.oracle import annulus_solution, sample_to_grid

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record(request):
    """Print and keep one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def _record(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return _record


@pytest.fixture(scope="session")
def sol():
    return annulus_solution(2, 0.25, 1.0)


@pytest.fixture(scope="session")
def oracle_field_128(sol):
    grid = sol.grid(1 / 128)
    return sample_to_grid(sol, grid, sol.mask(grid))


@pytest.fixture(scope="session")
def oracle_cases():
    return [oracle_case(64), oracle_case(128)]


class RingRuns:
    """Free-boundary runs for the ring measure, computed once per session."""

    def __init__(self):
        self._runs = {}

    def get(self, init_radius, n):
        key = (float(init_radius), int(n))
        if key not in self._runs:
            h = 1.0 / n
            reach = max(init_radius, 1.0) * 1.15
            grid = Grid.covering(-reach, reach, -reach, reach, h)
            init = DomainMask.disk(grid, (0.0, 0.0), init_radius)
            t0 = time.perf_counter()
            surf = solve_quadrature_surface(MeasureSpec.ring(0.25, 2 * math.pi), init, FreeBoundaryParams())
            self._runs[key] = (surf, time.perf_counter() - t0)
        return self._runs[key]


@pytest.fixture(scope="session")
def ring_runs():
    return RingRuns()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
