import math

import numpy as np
import pytest

from quadsurf.errors import LevelAboveRayError, UnboundedRayError
from quadsurf.fields import DomainMask, Grid, ScalarField
from quadsurf.geometry import ConvexBody, NormalSample, sample_outer_normals
from quadsurf.thickness import (FLAG_NONMONOTONE, FLAG_OK, build_table, level_thickness, level_thicknesses,
                                outer_extent, outer_extents, predicted_slope, predicted_slopes, ray_profile,
                                thickness_derivative, thickness_derivatives)

C_EAST = NormalSample(np.array([0.25, 0.0]), np.array([1.0, 0.0]), 0)
BODY = ConvexBody.disk((0, 0), 0.25)


def _arrays(body, n):
    s = sample_outer_normals(body, n)
    return np.array([x.point for x in s]), np.array([x.normal for x in s])


def test_ray_profile_values(oracle_field_128):
    prof = ray_profile(oracle_field_128, C_EAST, dr=0.005)
    assert prof.radii[0] == 0
    assert prof.values[0] == pytest.approx(math.log(4), abs=1e-12)
    k = 40
    assert prof.radii[k] == pytest.approx(0.2, abs=1e-12)
    assert prof.values[k] == pytest.approx(math.log(1 / 0.45), abs=1e-5)
    assert prof.values[-1] <= 1e-12
    assert prof.radii[-1] == pytest.approx(0.75, abs=oracle_field_128.h)


def test_ray_profile_step_must_not_exceed_h(oracle_field_128):
    with pytest.raises(ValueError):
        ray_profile(oracle_field_128, C_EAST, dr=2 * oracle_field_128.h)


def test_outer_extent_of_oracle(oracle_field_128):
    pts, nrm = _arrays(BODY, 360)
    d, flags, reenter = outer_extents(oracle_field_128.mask, pts, nrm)
    assert np.all(flags == FLAG_OK) and not reenter.any()
    np.testing.assert_allclose(d, 0.75, atol=1e-4)
    assert outer_extent(oracle_field_128, C_EAST) == pytest.approx(0.75, abs=1e-4)


def test_outer_extent_on_larger_disk():
    grid = Grid.covering(-1.3, 1.3, -1.3, 1.3, 1 / 128)
    mask = DomainMask.disk(grid, (0, 0), 1.3)
    pts, nrm = _arrays(BODY, 360)
    d, _, _ = outer_extents(mask, pts, nrm)
    np.testing.assert_allclose(d, 1.05, atol=1e-4)


def test_outer_extent_along_chord_of_offset_disk():
    center, R = np.array([0.3, -0.2]), 1.0
    grid = Grid.covering(-0.7, 1.3, -1.2, 0.8, 1 / 128)
    mask = DomainMask.disk(grid, center, R)
    pts, nrm = _arrays(BODY, 72)
    d, _, _ = outer_extents(mask, pts, nrm)
    # |c + s n - center| = R  =>  s = -b + sqrt(b^2 - q)
    w = pts - center
    b = np.einsum("ij,ij->i", w, nrm)
    q = np.einsum("ij,ij->i", w, w) - R ** 2
    exact = -b + np.sqrt(b * b - q)
    np.testing.assert_allclose(d, exact, atol=1e-4)


def test_unbounded_ray():
    grid = Grid.covering(-1, 1, -1, 1, 1 / 32)
    mask = DomainMask.disk(grid, (0, 0), 5.0)
    with pytest.raises(UnboundedRayError):
        outer_extent(mask, C_EAST)


@pytest.mark.parametrize("t,expected", [(0.0, 0.75), (0.2, math.exp(-0.2) - 0.25), (0.5, math.exp(-0.5) - 0.25)])
def test_level_thickness_of_oracle(oracle_field_128, t, expected):
    assert level_thickness(oracle_field_128, C_EAST, t) == pytest.approx(expected, abs=1e-4)


def test_level_thickness_matches_interpolant(oracle_field_128):
    f = oracle_field_128
    pts, nrm = _arrays(BODY, 90)
    d, flags = level_thicknesses(f, pts, nrm, 0.3)
    vals = f.sample(pts + d[:, None] * nrm, "cubic")
    np.testing.assert_allclose(vals, 0.3, atol=1e-9)


def test_level_above_ray(oracle_field_128):
    with pytest.raises(LevelAboveRayError):
        level_thickness(oracle_field_128, C_EAST, 1.5)


def test_thickness_derivative_matches_chain_rule(oracle_field_128):
    for t in (0.2, 0.5):
        measured = thickness_derivative(oracle_field_128, C_EAST, t)
        assert measured == pytest.approx(-math.exp(-t), abs=1e-3)
        assert predicted_slope(oracle_field_128, C_EAST, t) == pytest.approx(-math.exp(-t), abs=1e-3)


def test_chain_rule_identity_on_all_samples(oracle_field_128):
    pts, nrm = _arrays(BODY, 120)
    for t in (0.1, 0.3, 0.7):
        m, _ = thickness_derivatives(oracle_field_128, pts, nrm, t)
        p, _ = predicted_slopes(oracle_field_128, pts, nrm, t)
        assert np.max(np.abs(m - p)) < 1e-3


def test_derivative_step_must_keep_level_positive(oracle_field_128):
    with pytest.raises(ValueError):
        thickness_derivative(oracle_field_128, C_EAST, 0.001, dt=0.01)


def test_table_columns_for_oracle(oracle_field_128):
    table = build_table(oracle_field_128, oracle_field_128.mask, BODY, 360, [0.2, 0.5])
    np.testing.assert_array_equal(table.levels, [0.0, 0.2, 0.5])
    np.testing.assert_allclose(table.d, np.tile([0.75, 0.568731, 0.356531], (360, 1)), atol=1e-4)
    np.testing.assert_allclose(table.d[:, :1] - table.d, np.tile([0, 0.181269, 0.393469], (360, 1)), atol=1e-4)
    assert np.all(np.diff(table.d, axis=1) < 0)
    assert np.all(table.flags == FLAG_OK)
    rows = table.rows()
    assert len(rows) == 360 * 3 and rows[0][0] == 0 and rows[0][5] == 0.0


def test_table_without_levels(oracle_field_128):
    table = build_table(oracle_field_128, oracle_field_128.mask, BODY, 36, [])
    assert table.d.shape == (36, 1)
    np.testing.assert_allclose(table.extent, 0.75, atol=1e-4)


def test_table_on_polygon_body(oracle_field_128):
    body = ConvexBody.polygon([(-0.2, -0.2), (0.2, -0.2), (0.2, 0.2), (-0.2, 0.2)])
    table = build_table(oracle_field_128, oracle_field_128.mask, body, 64, [0.3])
    ends = table.points + table.extent[:, None] * table.normals
    np.testing.assert_allclose(np.linalg.norm(ends, axis=1), 1.0, atol=1e-4)


def test_non_monotone_field_is_flagged():
    grid = Grid.covering(-1, 1, -1, 1, 1 / 64)
    mask = DomainMask.disk(grid, (0, 0), 1.0)
    X, Y = grid.mesh()
    r = np.hypot(X, Y)
    f = ScalarField(grid, 1.25 - r + 0.3 * np.sin(20 * r), mask)
    pts, nrm = _arrays(BODY, 36)
    d, flags = level_thicknesses(f, pts, nrm, 0.3)
    assert np.all(flags == FLAG_NONMONOTONE)
