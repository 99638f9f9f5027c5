"""Convex bodies, outer normals, normal rays and the radial decomposition of the exterior."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import InsideBodyError, InvalidBodyError

FAN_STEP = math.radians(1.0)
ON_BOUNDARY_TOL = 1e-12


def _outward_edge_normals(vertices):
    e = np.roll(vertices, -1, axis=0) - vertices
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A disk or a strictly convex counterclockwise polygon."""

    kind: str
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    vertices: Optional[np.ndarray] = None

    @classmethod
    def disk(cls, center, radius):
        radius = float(radius)
        if not radius > 0 or not math.isfinite(radius):
            raise InvalidBodyError(f"disk radius must be positive, got {radius}")
        c = np.array(center, dtype=float).reshape(2)
        return cls("disk", center=c, radius=radius)

    @classmethod
    def polygon(cls, vertices):
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise InvalidBodyError("polygon needs at least 3 vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        scale = np.max(np.linalg.norm(e, axis=1)) ** 2
        if np.any(np.linalg.norm(e, axis=1) == 0):
            raise InvalidBodyError("polygon has repeated vertices")
        if np.all(cross > 1e-14 * scale):
            pass
        elif np.all(cross < -1e-14 * scale):
            v = v[::-1].copy()
        else:
            raise InvalidBodyError("polygon is not strictly convex (collinear or reflex vertices)")
        return cls("polygon", vertices=v)

    # -- basic measures --------------------------------------------------

    @property
    def perimeter(self):
        if self.kind == "disk":
            return 2 * math.pi * self.radius
        return float(np.sum(np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)))

    def bounding_box(self):
        if self.kind == "disk":
            c, r = self.center, self.radius
            return (c[0] - r, c[0] + r, c[1] - r, c[1] + r)
        v = self.vertices
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    def signed_distance(self, points):
        """Euclidean signed distance, negative inside. Vectorised over (..., 2)."""
        p = np.asarray(points, dtype=float)
        if self.kind == "disk":
            return np.linalg.norm(p - self.center, axis=-1) - self.radius
        foot = self._polygon_nearest(p)
        dist = np.linalg.norm(p - foot, axis=-1)
        n = _outward_edge_normals(self.vertices)
        # inside iff on the inner side of every edge line
        offs = np.einsum("...kc,kc->...k", p[..., None, :] - self.vertices, n)
        inside = np.all(offs < 0, axis=-1)
        return np.where(inside, -dist, dist)

    def contains(self, points, tol=0.0):
        return self.signed_distance(points) <= tol

    def _polygon_nearest(self, p):
        a = self.vertices
        d = np.roll(a, -1, axis=0) - a
        w = p[..., None, :] - a
        t = np.clip(np.einsum("...kc,kc->...k", w, d) / np.einsum("kc,kc->k", d, d), 0.0, 1.0)
        cand = a + t[..., None] * d
        dist2 = np.sum((p[..., None, :] - cand) ** 2, axis=-1)
        k = np.argmin(dist2, axis=-1)
        return np.take_along_axis(cand, k[..., None, None], axis=-2)[..., 0, :]

    def project(self, points):
        """Metric projection onto the body (identity inside)."""
        p = np.asarray(points, dtype=float)
        if self.kind == "disk":
            v = p - self.center
            r = np.linalg.norm(v, axis=-1, keepdims=True)
            scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
            return self.center + v * scale
        sd = self.signed_distance(p)
        foot = self._polygon_nearest(p)
        return np.where((sd > 0)[..., None], foot, p)

    def to_dict(self):
        if self.kind == "disk":
            return {"kind": "disk", "center": [float(x) for x in self.center], "radius": float(self.radius)}
        return {"kind": "polygon", "vertices": [[float(x), float(y)] for x, y in self.vertices]}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "disk":
            return cls.disk(d["center"], d["radius"])
        if kind == "polygon":
            return cls.polygon(d["vertices"])
        raise InvalidBodyError(f"unknown body kind {kind!r}")


@dataclass(frozen=True, eq=False)
class NormalSample:
    point: np.ndarray
    normal: np.ndarray
    arc_index: int
    on_vertex_fan: bool = False


@dataclass(frozen=True, eq=False)
class NormalRay:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit vector")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_sample(cls, sample: NormalSample):
        return cls(sample.point, sample.normal)

    def at(self, s):
        return self.origin + np.multiply.outer(np.asarray(s, dtype=float), self.direction)


@dataclass(frozen=True, eq=False)
class RadialDecomposition:
    foot: np.ndarray
    radius: float
    normal: np.ndarray
    on_vertex_fan: bool = False

    def reconstruct(self):
        return self.foot + self.radius * self.normal


def sample_outer_normals(body: ConvexBody, n_samples: int) -> List[NormalSample]:
    """Boundary points of the body with outer unit normals.

    A disk gets exactly ``n_samples`` equally spaced points starting on the
    positive x axis. A polygon gets points spaced at most perimeter/n_samples
    along each edge, and at every vertex a fan of normals sweeping from the
    incoming to the outgoing edge normal in steps of at most one degree.
    """
    if n_samples < 8:
        raise ValueError("n_samples must be at least 8")
    out = []
    if body.kind == "disk":
        ang = 2 * np.pi * np.arange(n_samples) / n_samples
        normals = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        # exact cardinal directions
        normals[np.abs(normals) < 1e-15] = 0.0
        for k in range(n_samples):
            nrm = normals[k]
            out.append(NormalSample(body.center + body.radius * nrm, nrm, k))
        return out

    v = body.vertices
    m = len(v)
    edge_n = _outward_edge_normals(v)
    perim = body.perimeter
    k = 0
    for i in range(m):
        n_in = edge_n[i - 1]
        n_out = edge_n[i]
        a0 = math.atan2(n_in[1], n_in[0])
        turn = (math.atan2(n_out[1], n_out[0]) - a0) % (2 * math.pi)
        steps = max(1, math.ceil(turn / FAN_STEP - 1e-12))
        for s in range(steps + 1):
            a = a0 + turn * s / steps
            nrm = np.array([math.cos(a), math.sin(a)])
            nrm[np.abs(nrm) < 1e-15] = 0.0
            if s == 0:
                nrm = n_in.copy()
            elif s == steps:
                nrm = n_out.copy()
            out.append(NormalSample(v[i].copy(), nrm, k, on_vertex_fan=0 < s < steps))
            k += 1
        a_pt, b_pt = v[i], v[(i + 1) % m]
        L = float(np.linalg.norm(b_pt - a_pt))
        me = max(1, math.ceil(L * n_samples / perim - 1e-12))
        for j in range(1, me):
            out.append(NormalSample(a_pt + (b_pt - a_pt) * j / me, n_out.copy(), k))
            k += 1
    return out


def radial_decompose(x, body: ConvexBody) -> RadialDecomposition:
    """Write ``x`` outside the body as foot + radius * outer normal, foot on the boundary."""
    x = np.asarray(x, dtype=float)
    sd = float(body.signed_distance(x))
    if sd < -ON_BOUNDARY_TOL * max(1.0, float(np.max(np.abs(x)))):
        raise InsideBodyError(f"point {tuple(x)} lies strictly inside the body")
    if body.kind == "disk":
        v = x - body.center
        nrm = v / np.linalg.norm(v)
        foot = body.center + body.radius * nrm
        if sd <= ON_BOUNDARY_TOL:
            return RadialDecomposition(x.copy(), 0.0, nrm)
        return RadialDecomposition(foot, float(np.linalg.norm(x - foot)), nrm)

    foot = body._polygon_nearest(x)
    radius = float(np.linalg.norm(x - foot))
    if radius > ON_BOUNDARY_TOL:
        return RadialDecomposition(foot, radius, (x - foot) / radius)
    # on the boundary: edge normal, or the fan bisector at a vertex
    vdist = np.linalg.norm(body.vertices - x, axis=1)
    edge_n = _outward_edge_normals(body.vertices)
    i = int(np.argmin(vdist))
    if vdist[i] <= 1e-9:
        nrm = edge_n[i - 1] + edge_n[i]
        return RadialDecomposition(body.vertices[i].copy(), 0.0, nrm / np.linalg.norm(nrm), on_vertex_fan=True)
    a = body.vertices
    d = np.roll(a, -1, axis=0) - a
    offs = np.abs(np.einsum("kc,kc->k", x - a, edge_n))
    t = np.einsum("kc,kc->k", x - a, d) / np.einsum("kc,kc->k", d, d)
    offs = np.where((t >= 0) & (t <= 1), offs, np.inf)
    return RadialDecomposition(x.copy(), 0.0, edge_n[int(np.argmin(offs))].copy())


def decompose_points(points, body: ConvexBody):
    """Vectorised radial decomposition of points outside the body: (feet, radii, normals)."""
    p = np.asarray(points, dtype=float)
    feet = body.project(p)
    diff = p - feet
    radii = np.linalg.norm(diff, axis=-1)
    if np.any(body.signed_distance(p) < -ON_BOUNDARY_TOL):
        raise InsideBodyError("some points lie strictly inside the body")
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = diff / radii[..., None]
    return feet, radii, normals


def ray_body_distance(ray: NormalRay, body: ConvexBody) -> float:
    """Distance between a closed ray and the closed body; zero iff they meet."""
    o, d = ray.origin, ray.direction
    if body.kind == "disk":
        s = max(0.0, float(np.dot(body.center - o, d)))
        return max(0.0, float(np.linalg.norm(o + s * d - body.center)) - body.radius)

    if float(body.signed_distance(o)) <= 0:
        return 0.0
    a = body.vertices
    b = np.roll(a, -1, axis=0)
    e = b - a
    # ray-segment intersection: o + s d = a + u e
    den = d[0] * (-e[:, 1]) - d[1] * (-e[:, 0])
    rhs = a - o
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (rhs[:, 0] * (-e[:, 1]) - rhs[:, 1] * (-e[:, 0])) / den
        u = (d[0] * rhs[:, 1] - d[1] * rhs[:, 0]) / den
    hit = (np.abs(den) > 0) & (s >= 0) & (u >= 0) & (u <= 1)
    if np.any(hit):
        return 0.0
    # no intersection: the minimum is attained at an endpoint of the ray or of an edge
    sv = np.maximum(0.0, (a - o) @ d)
    dv = np.linalg.norm(o + sv[:, None] * d - a, axis=1)
    t = np.clip(np.einsum("kc,kc->k", o - a, e) / np.einsum("kc,kc->k", e, e), 0, 1)
    de = np.linalg.norm(a + t[:, None] * e - o, axis=1)
    return float(min(dv.min(), de.min()))


@dataclass(frozen=True)
class LipschitzEstimate:
    constant: float
    metric: str
    infinite: bool
    pair: tuple


def lipschitz_estimate(points, values, metric="chordal", arc_lengths=None, perimeter=None):
    """Largest difference quotient over all pairs of samples.

    ``metric="geodesic"`` measures pair distances along a closed curve using
    ``arc_lengths`` (positions along the curve) and ``perimeter``.
    """
    p = np.asarray(points, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(p) < 2:
        raise ValueError("need at least two samples")
    iu, ju = np.triu_indices(len(p), k=1)
    dv = np.abs(v[iu] - v[ju])
    if metric == "chordal":
        dist = np.linalg.norm(p[iu] - p[ju], axis=1)
    elif metric == "geodesic":
        if arc_lengths is None or perimeter is None:
            raise ValueError("geodesic metric needs arc_lengths and perimeter")
        s = np.asarray(arc_lengths, dtype=float)
        ds = np.abs(s[iu] - s[ju]) % perimeter
        dist = np.minimum(ds, perimeter - ds)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    same = dist == 0
    if np.any(same & (dv > 0)):
        k = int(np.argmax(same & (dv > 0)))
        return LipschitzEstimate(math.inf, metric, True, (int(iu[k]), int(ju[k])))
    q = np.where(same, 0.0, dv / np.where(same, 1.0, dist))
    k = int(np.argmax(q))
    return LipschitzEstimate(float(q[k]), metric, False, (int(iu[k]), int(ju[k])))
