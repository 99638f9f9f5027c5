import math
import time

import numpy as np
import pytest

from quadsurf.errors import PreconditionError
from quadsurf.fields import DomainMask, Grid, ScalarField
from quadsurf.measures import Atom, DiscretizedMeasure, MeasureSpec, deposit
from quadsurf.oracle import annulus_solution
from quadsurf.poisson import assemble, boundary_normal_derivative, solve_dirichlet

TWO_PI = 2 * math.pi


def ring_problem(n, radius=1.0):
    h = 1.0 / n
    reach = max(radius, 1.0)
    grid = Grid.covering(-reach, reach, -reach, reach, h)
    mask = DomainMask.disk(grid, (0, 0), radius)
    rhs = deposit(MeasureSpec.ring(0.25, TWO_PI), grid)
    return grid, mask, rhs


def oracle_error(n, band):
    sol = annulus_solution(2, 0.25, 1.0)
    grid, mask, rhs = ring_problem(n)
    u = solve_dirichlet(mask, rhs)
    X, Y = grid.mesh()
    r = np.hypot(X, Y)
    sel = mask.inside & (np.abs(r - 0.25) > band)
    return float(np.max(np.abs(u.values[sel] - sol.u_of_r(r[sel]))))


def test_matches_oracle_outside_mollification_band():
    err = oracle_error(128, 4 / 128 + 2 / 128)
    assert err < 5e-3


def test_second_order_convergence():
    band = 4 / 64 + 2 / 64
    ratio = oracle_error(64, band) / oracle_error(128, band)
    assert 3 <= ratio <= 5


def test_zero_rhs_gives_zero():
    grid, mask, _ = ring_problem(32)
    u = solve_dirichlet(mask, DiscretizedMeasure(grid, np.zeros(grid.shape), 4 * grid.h))
    assert np.all(u.values == 0)


def test_solution_is_zero_outside_and_nonnegative():
    grid, mask, rhs = ring_problem(64)
    u, info = solve_dirichlet(mask, rhs, return_info=True)
    assert np.all(u.values[~mask.inside] == 0)
    assert np.all(u.values >= 0)
    assert info.residual_history[-1] <= 1e-10
    assert info.unknowns == int(mask.inside.sum())


def test_linearity():
    grid, mask, rhs = ring_problem(32)
    u1 = solve_dirichlet(mask, rhs)
    u3 = solve_dirichlet(mask, DiscretizedMeasure(grid, 3 * rhs.density, rhs.mollification_radius))
    np.testing.assert_allclose(u3.values, 3 * u1.values, rtol=1e-9, atol=1e-12)


def test_constant_source_reproduces_paraboloid():
    # -Laplace(1 - x^2 - y^2) = 4 with zero data on the unit circle
    import scipy.sparse.linalg as spla
    errs = []
    for n in (16, 32):
        grid = Grid.covering(-1, 1, -1, 1, 1 / n)
        mask = DomainMask.disk(grid, (0, 0), 1.0)
        A, index = assemble(mask)
        X, Y = grid.mesh()
        inside = index >= 0
        x = spla.spsolve(A.tocsc(), np.full(A.shape[0], 4.0))
        errs.append(np.max(np.abs(x - (1 - X ** 2 - Y ** 2)[inside])))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] > 3


def test_support_too_close_to_boundary():
    grid = Grid.covering(-1, 1, -1, 1, 1 / 32)
    mask = DomainMask.disk(grid, (0, 0), 1.0)
    rhs = deposit(MeasureSpec(atoms=[Atom((0.9, 0.0), 1.0)]), grid)
    with pytest.raises(PreconditionError):
        solve_dirichlet(mask, rhs)


def test_bad_tolerance():
    grid, mask, rhs = ring_problem(32)
    with pytest.raises(ValueError):
        solve_dirichlet(mask, rhs, tol=0.0)


def test_normal_derivative_of_oracle(oracle_field_128):
    bd = boundary_normal_derivative(oracle_field_128, oracle_field_128.mask, 360)
    assert len(bd.dudn) == 360
    assert np.max(np.abs(bd.dudn + 1.0)) < 2e-2
    assert not bd.flags.any()


def test_normal_derivative_on_larger_disk():
    grid, mask, rhs = ring_problem(128, radius=1.3)
    u = solve_dirichlet(mask, rhs)
    bd = boundary_normal_derivative(u, mask)
    assert np.max(np.abs(bd.dudn + 1 / 1.3)) < 2e-2
    assert np.all(bd.dudn <= 0)


def test_normal_derivative_of_zero_field():
    grid = Grid.covering(-1, 1, -1, 1, 1 / 32)
    mask = DomainMask.disk(grid, (0, 0), 1.0)
    bd = boundary_normal_derivative(ScalarField(grid, np.zeros(grid.shape), mask), mask)
    assert np.all(bd.dudn == 0)


def test_flux_balance_at_128():
    grid, mask, rhs = ring_problem(128)
    u = solve_dirichlet(mask, rhs)
    bd = boundary_normal_derivative(u, mask)
    assert bd.flux == pytest.approx(TWO_PI, rel=0.02)


def test_thin_domain_flags_samples():
    # a slab only a few cells thick cannot host the 3-cell one-sided stencil
    grid = Grid.covering(-1, 1, -0.2, 0.2, 1 / 32)
    mask = DomainMask.ellipse(grid, 0.9, 0.06)
    u = ScalarField(grid, np.where(mask.inside, 1.0, 0.0), mask)
    bd = boundary_normal_derivative(u, mask)
    assert bd.flags.any()


def test_solve_runtime_at_128():
    grid, mask, rhs = ring_problem(128)
    t0 = time.perf_counter()
    solve_dirichlet(mask, rhs)
    assert time.perf_counter() - t0 < 30
