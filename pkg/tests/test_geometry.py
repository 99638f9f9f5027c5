import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadsurf.errors import InsideBodyError, InvalidBodyError
from quadsurf.geometry import (ConvexBody, NormalRay, decompose_points, lipschitz_estimate,
                               radial_decompose, ray_body_distance, sample_outer_normals)

SQUARE = ConvexBody.polygon([(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)])
DISK = ConvexBody.disk((0.0, 0.0), 0.25)


def test_disk_normals_start_on_cardinal_directions():
    samples = sample_outer_normals(DISK, 8)
    got = np.array([s.normal for s in samples[::2]])
    np.testing.assert_allclose(got, [(1, 0), (0, 1), (-1, 0), (0, -1)], atol=1e-15)
    np.testing.assert_allclose(samples[0].point, (0.25, 0.0), atol=1e-15)


def test_too_few_samples_rejected():
    with pytest.raises(ValueError):
        sample_outer_normals(DISK, 4)


def test_disk_points_lie_on_circle_along_normals():
    for s in sample_outer_normals(DISK, 360):
        np.testing.assert_allclose(s.point, 0.25 * s.normal, atol=1e-12)
        assert abs(np.linalg.norm(s.normal) - 1) < 1e-12


def test_square_corner_fan_sweeps_quarter_circle():
    samples = sample_outer_normals(SQUARE, 400)
    fan = np.array([s.normal for s in samples if np.allclose(s.point, (0.5, 0.5))])
    diag = np.array([math.sqrt(0.5), math.sqrt(0.5)])
    for target in ((1.0, 0.0), (0.0, 1.0), diag):
        assert np.min(np.linalg.norm(fan - target, axis=1)) < 1e-12
    # every fan member lies in the quarter circle between the edge normals
    assert np.all(fan >= -1e-12)


def test_polygon_edge_normals_are_outward_and_perpendicular():
    for s in sample_outer_normals(SQUARE, 64):
        if s.on_vertex_fan:
            continue
        on_right = abs(s.point[0] - 0.5) < 1e-12 and abs(s.point[1]) < 0.5 - 1e-12
        if on_right:
            np.testing.assert_allclose(s.normal, (1, 0), atol=1e-12)


@pytest.mark.parametrize("body", [DISK, SQUARE], ids=["disk", "square"])
def test_fan_continuity_and_spacing(body):
    n = 120
    samples = sample_outer_normals(body, n)
    ang = np.array([math.atan2(s.normal[1], s.normal[0]) for s in samples])
    steps = np.abs((np.diff(np.append(ang, ang[0])) + np.pi) % (2 * np.pi) - np.pi)
    assert steps.max() <= 2 * np.pi / n + math.radians(1.0) + 1e-12
    pts = np.array([s.point for s in samples])
    gaps = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    assert gaps.max() <= body.perimeter / n + 1e-12


def test_degenerate_bodies_rejected():
    with pytest.raises(InvalidBodyError):
        ConvexBody.disk((0, 0), 0.0)
    with pytest.raises(InvalidBodyError):
        ConvexBody.polygon([(0, 0), (1, 0), (2, 0)])
    with pytest.raises(InvalidBodyError):
        ConvexBody.polygon([(0, 0), (1, 0), (0.2, 0.2), (0, 1)])


def test_clockwise_polygon_is_reoriented():
    body = ConvexBody.polygon([(0, 0), (0, 1), (1, 0)])
    v = body.vertices
    area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    assert area > 0


def test_radial_decompose_disk():
    rd = radial_decompose((0.7, 0.0), DISK)
    np.testing.assert_allclose(rd.foot, (0.25, 0.0), atol=1e-15)
    assert rd.radius == pytest.approx(0.45, abs=1e-15)
    np.testing.assert_allclose(rd.normal, (1.0, 0.0), atol=1e-15)


def test_radial_decompose_boundary_point_has_zero_radius():
    assert radial_decompose((0.25, 0.0), DISK).radius == 0.0


def test_radial_decompose_square_corner():
    rd = radial_decompose((1.0, 1.0), SQUARE)
    np.testing.assert_allclose(rd.foot, (0.5, 0.5), atol=1e-15)
    assert rd.radius == pytest.approx(math.sqrt(0.5), abs=1e-15)
    np.testing.assert_allclose(rd.normal, (math.sqrt(0.5), math.sqrt(0.5)), atol=1e-15)


def test_radial_decompose_inside_raises():
    with pytest.raises(InsideBodyError):
        radial_decompose((0.1, 0.0), DISK)
    with pytest.raises(InsideBodyError):
        radial_decompose((0.0, 0.0), SQUARE)


def _brute_nearest(body, x, n=20000):
    pts = np.array([s.point for s in sample_outer_normals(body, n)])
    return np.min(np.linalg.norm(pts - x, axis=1))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_round_trip_and_projection_optimality(x, y):
    p = np.array([x, y])
    for body in (DISK, SQUARE):
        if body.signed_distance(p) <= 1e-9:
            continue
        rd = radial_decompose(p, body)
        np.testing.assert_allclose(rd.reconstruct(), p, atol=1e-9)
        assert rd.radius <= _brute_nearest(body, p, 2000) + 1e-12


def test_projection_optimality_against_boundary_samples(rng):
    pts = rng.uniform(-2, 2, size=(200, 2))
    pts = pts[SQUARE.signed_distance(pts) > 0]
    bnd = np.array([s.point for s in sample_outer_normals(SQUARE, 1000)])
    _, radii, _ = decompose_points(pts, SQUARE)
    brute = np.min(np.linalg.norm(pts[:, None] - bnd[None], axis=2), axis=1)
    assert np.all(radii <= brute + 1e-12)


def test_ray_through_center_hits_disk():
    assert ray_body_distance(NormalRay((1.0, 0.0), (-1.0, 0.0)), DISK) == 0.0


def test_ray_passing_above_disk():
    assert ray_body_distance(NormalRay((0.0, 2.0), (1.0, 0.0)), DISK) == pytest.approx(1.75, abs=1e-12)


def test_ray_from_inside_body_is_zero():
    assert ray_body_distance(NormalRay((0.1, 0.0), (1.0, 0.0)), DISK) == 0.0
    assert ray_body_distance(NormalRay((0.1, 0.0), (1.0, 0.0)), SQUARE) == 0.0


def test_ellipse_inward_normal_misses_small_disk():
    theta = math.pi / 4
    p = np.array([2 * math.cos(theta), 0.5 * math.sin(theta)])
    n = np.array([math.cos(theta) / 2, 2 * math.sin(theta)])
    d = -n / np.linalg.norm(n)
    s = np.linspace(0, 5, 500001)
    brute = np.min(np.linalg.norm(p + s[:, None] * d, axis=1)) - 0.05
    got = ray_body_distance(NormalRay(p, d), ConvexBody.disk((0, 0), 0.05))
    assert got == pytest.approx(brute, abs=1e-8)
    assert got == pytest.approx(1.236, abs=1e-3)


def test_polygon_ray_distance_against_brute_force(rng):
    for _ in range(50):
        o = rng.uniform(-2, 2, 2)
        a = rng.uniform(0, 2 * np.pi)
        d = np.array([math.cos(a), math.sin(a)])
        s = np.linspace(0, 6, 20001)
        brute = max(0.0, float(np.min(SQUARE.signed_distance(o + s[:, None] * d))))
        assert ray_body_distance(NormalRay(o, d), SQUARE) == pytest.approx(brute, abs=5e-4)


def test_lipschitz_constant_values():
    pts = np.array([s.point for s in sample_outer_normals(ConvexBody.disk((0, 0), 1.0), 360)])
    assert lipschitz_estimate(pts, np.full(360, 0.75)).constant == 0.0
    est = lipschitz_estimate(pts, pts[:, 0])
    assert est.constant == pytest.approx(1.0, abs=1e-9)
    assert est.metric == "chordal"


def test_lipschitz_duplicate_point_is_infinite():
    est = lipschitz_estimate([(0, 0), (0, 0)], [0.0, 1.0])
    assert est.infinite and math.isinf(est.constant)


def test_lipschitz_geodesic_metric():
    ang = 2 * np.pi * np.arange(90) / 90
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    est = lipschitz_estimate(pts, np.sin(ang), metric="geodesic", arc_lengths=ang, perimeter=2 * np.pi)
    assert est.constant == pytest.approx(1.0, abs=1e-3)
    assert est.constant <= 1.0 + 1e-12


def test_body_dict_round_trip():
    for body in (DISK, SQUARE):
        back = ConvexBody.from_dict(body.to_dict())
        assert back.kind == body.kind
        if body.kind == "disk":
            assert back.radius == body.radius
        else:
            np.testing.assert_array_equal(back.vertices, body.vertices)
