"""Ray profiles, extents d(c), level thicknesses d_t(c) and their t-derivative.

All routines march along outer normal rays c + r*nu(c) of the convex body.
Field values are read through the C1 cubic interpolant by default so that
differences of d_t in t resolve the field's own slope; the domain mask is
read bilinearly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import LevelAboveRayError, UnboundedRayError
from .fields import DomainMask, ScalarField
from .geometry import ConvexBody, NormalSample, sample_outer_normals

BISECT_REL_TOL = 1e-9
FIELD_METHOD = "cubic"

FLAG_OK = ""
FLAG_UNBOUNDED = "unbounded-ray"
FLAG_ABOVE = "level-above-ray"
FLAG_NONMONOTONE = "monotonicity-violation"
FLAG_MULTIPLE = "multiple-crossings"
FLAG_COLUMN = "column-not-decreasing"


def _as_arrays(samples):
    if isinstance(samples, NormalSample):
        samples = [samples]
    pts = np.array([s.point for s in samples], dtype=float).reshape(-1, 2)
    nrm = np.array([s.normal for s in samples], dtype=float).reshape(-1, 2)
    return pts, nrm


def _max_radius(grid, pts, nrm):
    x0, x1, y0, y1 = grid.extent
    return float(np.hypot(x1 - x0, y1 - y0))


@dataclass
class RayMarch:
    """Fields sampled along a bundle of rays at radii k*dr."""

    radii: np.ndarray
    phi: np.ndarray      # (n, K) mask values, +inf off the grid
    values: np.ndarray   # (n, K) field values, nan off the grid
    exit_index: np.ndarray  # first k with phi >= 0, -1 if the ray never leaves

    def valid(self):
        k = np.arange(len(self.radii))[None, :]
        return (k <= self.exit_index[:, None]) & (self.exit_index[:, None] >= 0)


def march(field: ScalarField, mask: DomainMask, pts, nrm, dr, method=FIELD_METHOD):
    rmax = _max_radius(mask.grid, pts, nrm)
    radii = np.arange(0.0, rmax + dr, dr)
    P = pts[:, None, :] + radii[None, :, None] * nrm[:, None, :]
    phi = mask.sample(P, fill=np.inf)
    vals = field.sample(P, method, fill=np.nan) if field is not None else None
    outside = phi >= 0
    exit_index = np.where(outside.any(axis=1), np.argmax(outside, axis=1), -1)
    return RayMarch(radii, phi, vals, exit_index)


@dataclass
class RayProfile:
    sample: NormalSample
    radii: np.ndarray
    values: np.ndarray


def ray_profile(field: ScalarField, sample: NormalSample, dr=None, method=FIELD_METHOD) -> RayProfile:
    """u along c + r*nu(c) from r = 0 up to and including the first sample past the boundary."""
    mask = field.mask
    dr = field.h if dr is None else float(dr)
    if dr > field.h:
        raise ValueError("profile step must not exceed the grid spacing")
    pts, nrm = _as_arrays(sample)
    m = march(field, mask, pts, nrm, dr, method)
    k = int(m.exit_index[0])
    if k < 0 or not np.isfinite(m.values[0, k]):
        raise UnboundedRayError("ray leaves the grid before crossing the boundary")
    vals = m.values[0, :k + 1].copy()
    return RayProfile(sample, m.radii[:k + 1].copy(), vals)


def _bisect(fun, lo, hi, target, n_iter):
    """Vectorised bisection for fun(r) = target with fun(lo) > target >= fun(hi)."""
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        above = fun(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def _n_bisect(dr, h):
    return int(np.ceil(np.log2(dr / (BISECT_REL_TOL * h)))) + 1


def outer_extents(mask: DomainMask, pts, nrm, dr=None):
    """First root of phi along each ray, bracketed at step dr (default h/2) then bisected."""
    h = mask.grid.h
    dr = h / 2 if dr is None else float(dr)
    m = march(None, mask, pts, nrm, dr)
    flags = np.full(len(pts), FLAG_OK, dtype=object)
    k = m.exit_index
    unbounded = (k < 0) | ~np.isfinite(m.phi[np.arange(len(pts)), np.maximum(k, 0)])
    flags[unbounded] = FLAG_UNBOUNDED
    k = np.maximum(k, 1)
    lo = m.radii[k - 1]
    hi = m.radii[k]

    def phi_along(r):
        return mask.sample(pts + r[:, None] * nrm, fill=np.inf)

    # bracket is phi(lo) < 0 <= phi(hi); reuse the decreasing-function bisection on -phi
    d = _bisect(lambda r: -phi_along(r), lo, hi, 0.0, _n_bisect(dr, h))
    d[unbounded] = np.nan
    # re-entry after the first exit breaks the single-interval picture
    n, K = m.phi.shape
    after = np.arange(K)[None, :] > m.exit_index[:, None]
    reenter = np.any(after & (m.phi < 0), axis=1) & ~unbounded
    return d, flags, reenter


def outer_extent(field_or_mask, sample: NormalSample, dr=None) -> float:
    """d(c) = sup{r > 0 : c + r nu(c) in Omega} via the first crossing of the mask boundary."""
    mask = field_or_mask.mask if isinstance(field_or_mask, ScalarField) else field_or_mask
    pts, nrm = _as_arrays(sample)
    d, flags, _ = outer_extents(mask, pts, nrm, dr)
    if flags[0] == FLAG_UNBOUNDED:
        raise UnboundedRayError("ray leaves the grid before crossing the boundary")
    return float(d[0])


def level_thicknesses(field: ScalarField, pts, nrm, t, dr=None, method=FIELD_METHOD):
    """Vectorised d_t(c): first root of u(c + r nu) = t, with per-ray flags.

    Returns (d, flags) where rays whose start value is not above ``t`` get
    nan and FLAG_ABOVE. A bracket containing an increase gets
    FLAG_NONMONOTONE; a second downward crossing of ``t`` before the
    boundary gets FLAG_MULTIPLE. Both keep the first-crossing value.
    """
    mask = field.mask
    h = field.h
    dr = h / 2 if dr is None else float(dr)
    if t == 0:
        d, flags, _ = outer_extents(mask, pts, nrm, dr)
        return d, flags
    m = march(field, mask, pts, nrm, dr, method)
    n, K = m.values.shape
    flags = np.full(n, FLAG_OK, dtype=object)
    valid = m.valid()
    vals = np.where(valid & np.isfinite(m.values), m.values, -1e300)
    unbounded = m.exit_index < 0
    flags[unbounded] = FLAG_UNBOUNDED
    above = (vals[:, 0] <= t) & ~unbounded
    flags[above] = FLAG_ABOVE
    below = vals <= t
    kk = np.where(below.any(axis=1), np.argmax(below, axis=1), 0)
    bad = unbounded | above | (kk == 0)
    kk = np.maximum(kk, 1)
    lo = m.radii[kk - 1]
    hi = m.radii[kk]

    idx = np.arange(K)[None, :]
    inc = np.diff(vals, axis=1) > 0
    nonmono = np.any(inc & (idx[:, :-1] < (kk - 1)[:, None]), axis=1)
    recross = np.any((vals[:, 1:] > t) & (idx[:, 1:] > kk[:, None]), axis=1)
    flags[nonmono & ~bad] = FLAG_NONMONOTONE
    flags[recross & ~nonmono & ~bad] = FLAG_MULTIPLE

    def u_along(r):
        return field.sample(pts + r[:, None] * nrm, method, fill=np.nan)

    d = _bisect(u_along, lo, hi, t, _n_bisect(dr, h))
    d[bad] = np.nan
    return d, flags


def level_thickness(field: ScalarField, sample: NormalSample, t, dr=None, method=FIELD_METHOD) -> float:
    """d_t(c) = sup{r > 0 : u(c + r nu(c)) > t}, computed as the first crossing."""
    pts, nrm = _as_arrays(sample)
    d, flags = level_thicknesses(field, pts, nrm, float(t), dr, method)
    if flags[0] == FLAG_ABOVE:
        raise LevelAboveRayError(f"level {t} is not below u(c)")
    if flags[0] == FLAG_UNBOUNDED:
        raise UnboundedRayError("ray leaves the grid before crossing the boundary")
    return float(d[0])


def default_dt(field: ScalarField):
    return 1e-3 * field.max_value()[0]


def thickness_derivatives(field: ScalarField, pts, nrm, t, dt=None, method=FIELD_METHOD):
    """Central difference of d_t in t with one Richardson step (dt, dt/2)."""
    dt = default_dt(field) if dt is None else float(dt)
    if t - dt <= 0:
        raise ValueError("t - dt must stay positive")

    def central(step):
        dp, fp = level_thicknesses(field, pts, nrm, t + step, method=method)
        dm, fm = level_thicknesses(field, pts, nrm, t - step, method=method)
        return (dp - dm) / (2 * step), np.where(fp != FLAG_OK, fp, fm)

    s1, f1 = central(dt)
    s2, f2 = central(dt / 2)
    return (4 * s2 - s1) / 3, np.where(f1 != FLAG_OK, f1, f2)


def thickness_derivative(field: ScalarField, sample: NormalSample, t, dt=None, method=FIELD_METHOD) -> float:
    pts, nrm = _as_arrays(sample)
    s, _ = thickness_derivatives(field, pts, nrm, float(t), dt, method)
    return float(s[0])


def grad_norm_at(field: ScalarField, points, method=FIELD_METHOD):
    g = field.gradient_at(points, method)
    return np.linalg.norm(g, axis=-1)


def boundary_grad_norm(field: ScalarField, points):
    """|du/dn| on boundary points from the one-sided fit used by the Poisson module."""
    mask = field.mask
    h = field.h
    nrm = mask.normals(points)
    s1, s2 = 2 * h, 3 * h
    u1 = field.sample(points - s1 * nrm)
    u2 = field.sample(points - s2 * nrm)
    return np.abs((u1 * s2 ** 2 - u2 * s1 ** 2) / (s1 * s2 * (s2 - s1)))


def predicted_slopes(field: ScalarField, pts, nrm, t, method=FIELD_METHOD):
    d, flags = level_thicknesses(field, pts, nrm, t, method=method)
    level_pts = pts + d[:, None] * nrm
    ok = np.isfinite(d)
    g = np.full(len(pts), np.nan)
    if np.any(ok):
        g[ok] = grad_norm_at(field, level_pts[ok], method)
    return -1.0 / g, flags


def predicted_slope(field: ScalarField, sample: NormalSample, t, method=FIELD_METHOD) -> float:
    """-1/|grad u| at the level point c + d_t(c) nu(c)."""
    pts, nrm = _as_arrays(sample)
    s, _ = predicted_slopes(field, pts, nrm, float(t), method)
    return float(s[0])


@dataclass
class ThicknessTable:
    points: np.ndarray
    normals: np.ndarray
    arc_index: np.ndarray
    levels: np.ndarray          # levels[0] == 0
    d: np.ndarray               # (n_samples, n_levels); column 0 is d(c)
    flags: np.ndarray = field(repr=False)

    @property
    def extent(self):
        return self.d[:, 0]

    def rows(self):
        """(c_index, cx, cy, nux, nuy, t, d_t, flag) in (arc_index, level) order."""
        out = []
        for i in range(len(self.points)):
            for j, t in enumerate(self.levels):
                out.append((int(self.arc_index[i]), self.points[i, 0], self.points[i, 1],
                            self.normals[i, 0], self.normals[i, 1], float(t), self.d[i, j], self.flags[i, j]))
        return out


def build_table(field: ScalarField, mask: DomainMask, body: ConvexBody, n_c: int,
                t_levels: Sequence[float], method=FIELD_METHOD) -> ThicknessTable:
    if mask is not field.mask:
        field = ScalarField(field.grid, field.values, mask)
    samples = sample_outer_normals(body, n_c)
    pts, nrm = _as_arrays(samples)
    levels = [0.0] + sorted(float(t) for t in t_levels if float(t) != 0.0)
    cols = []
    flag_cols = []
    for t in levels:
        d, f = level_thicknesses(field, pts, nrm, t, method=method)
        cols.append(d)
        flag_cols.append(f)
    d = np.stack(cols, axis=1)
    flags = np.stack(flag_cols, axis=1).astype(object)
    if len(levels) > 1:
        with np.errstate(invalid="ignore"):
            bad = ~(np.diff(d, axis=1) < 0)
        fin = np.isfinite(d[:, 1:]) & np.isfinite(d[:, :-1])
        for i, j in zip(*np.nonzero(bad & fin)):
            if flags[i, j + 1] == FLAG_OK:
                flags[i, j + 1] = FLAG_COLUMN
    arc = np.array([s.arc_index for s in samples])
    return ThicknessTable(pts, nrm, arc, np.array(levels), d, flags)
