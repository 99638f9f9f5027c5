"""Uniform-grid scalar fields, signed-distance domain masks and level contours.

Arrays are indexed ``values[i, j]`` with node ``(i, j)`` at
``origin + (i*h, j*h)``, i.e. the first axis is x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure as skmeasure

from .errors import NearBoundaryError, OutsideDomainError, PreconditionError


@dataclass(frozen=True)
class Grid:
    origin: tuple
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.nx < 16 or self.ny < 16:
            raise ValueError("grid needs at least 16 nodes per axis")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def covering(cls, xmin, xmax, ymin, ymax, h, margin_cells=8):
        """Smallest grid with nodes on multiples of ``h`` covering the box plus a margin."""
        pad = margin_cells * h
        i0 = int(np.floor((xmin - pad) / h))
        i1 = int(np.ceil((xmax + pad) / h))
        j0 = int(np.floor((ymin - pad) / h))
        j1 = int(np.ceil((ymax + pad) / h))
        nx = max(i1 - i0 + 1, 16)
        ny = max(j1 - j0 + 1, 16)
        return cls((i0 * h, j0 * h), h, nx, ny)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def x(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def extent(self):
        return (self.origin[0], self.origin[0] + (self.nx - 1) * self.h,
                self.origin[1], self.origin[1] + (self.ny - 1) * self.h)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def to_index(self, points):
        pts = np.asarray(points, dtype=float)
        return ((pts[..., 0] - self.origin[0]) / self.h,
                (pts[..., 1] - self.origin[1]) / self.h)

    def to_world(self, fi, fj):
        return np.stack([self.origin[0] + fi * self.h, self.origin[1] + fj * self.h], axis=-1)


def _cubic_weights(t):
    # Catmull-Rom (Keys, a = -1/2): C1, reproduces quadratics
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (t3 - t2),
    )


def sample_grid(values, grid: Grid, points, method="linear", fill=None):
    """Interpolate nodal ``values`` at ``points`` (shape (..., 2)).

    Raises OutsideDomainError when a stencil would leave the grid, unless
    ``fill`` is given, in which case such points get that value.
    """
    pts = np.asarray(points, dtype=float)
    fi, fj = grid.to_index(pts)
    fi = np.atleast_1d(fi)
    fj = np.atleast_1d(fj)
    if method == "linear":
        lo, hi = 0, 1
    elif method == "cubic":
        lo, hi = 1, 2
    else:
        raise ValueError(f"unknown interpolation method {method!r}")
    i = np.floor(fi).astype(int)
    j = np.floor(fj).astype(int)
    # nodes sitting exactly on the last usable cell edge
    i = np.where((i == grid.nx - hi) & (fi == grid.nx - hi), i - 1, i)
    j = np.where((j == grid.ny - hi) & (fj == grid.ny - hi), j - 1, j)
    bad = (i < lo) | (i > grid.nx - 1 - hi) | (j < lo) | (j > grid.ny - 1 - hi) | ~np.isfinite(fi + fj)
    if np.any(bad):
        if fill is None:
            raise OutsideDomainError("interpolation point outside the grid")
        i = np.where(bad, lo, i)
        j = np.where(bad, lo, j)
        fi = np.where(bad, lo, fi)
        fj = np.where(bad, lo, fj)
    tx = fi - i
    ty = fj - j
    if method == "linear":
        v = ((1 - tx) * (1 - ty) * values[i, j] + tx * (1 - ty) * values[i + 1, j]
             + (1 - tx) * ty * values[i, j + 1] + tx * ty * values[i + 1, j + 1])
    else:
        wx = _cubic_weights(tx)
        wy = _cubic_weights(ty)
        v = np.zeros_like(tx)
        for a in range(4):
            row = np.zeros_like(tx)
            for b in range(4):
                row += wy[b] * values[i + a - 1, j + b - 1]
            v += wx[a] * row
    if fill is not None:
        v = np.where(bad, fill, v)
    return v.reshape(pts.shape[:-1]) if pts.ndim > 1 else v[0]


def _orient_ccw(poly):
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return poly[::-1].copy() if area < 0 else poly


def contour_polylines(values, grid: Grid, level):
    """Marching-squares polylines of ``values == level`` in world coordinates, counterclockwise."""
    vmin, vmax = float(np.min(values)), float(np.max(values))
    if not (vmin < level < vmax):
        return []
    out = []
    for c in skmeasure.find_contours(np.asarray(values, dtype=float), level):
        if len(c) < 3:
            continue
        poly = grid.to_world(c[:, 0], c[:, 1])
        if np.allclose(poly[0], poly[-1]):
            poly = poly[:-1]
        out.append(_orient_ccw(poly))
    return out


def signed_distance_to_polylines(grid: Grid, polylines, sign, k=6):
    """Exact distance from every node to closed polylines, signed by ``sign`` (negative inside)."""
    segs_a = []
    segs_b = []
    for p in polylines:
        segs_a.append(p)
        segs_b.append(np.roll(p, -1, axis=0))
    a = np.concatenate(segs_a)
    b = np.concatenate(segs_b)
    X, Y = grid.mesh()
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    tree = cKDTree(a)
    k = min(k, len(a))
    _, idx = tree.query(nodes, k=k)
    idx = np.atleast_2d(idx.T).T if k == 1 else idx
    n = len(a)
    # predecessor segment of each vertex as well as its own
    prev = np.concatenate([np.arange(n)])
    starts = np.cumsum([0] + [len(p) for p in polylines])
    for s0, s1 in zip(starts[:-1], starts[1:]):
        prev[s0:s1] = np.roll(np.arange(s0, s1), 1)
    cand = np.concatenate([idx, prev[idx]], axis=1)
    pa = a[cand]
    pb = b[cand]
    d = pb - pa
    w = nodes[:, None, :] - pa
    L2 = np.einsum("nkc,nkc->nk", d, d)
    L2 = np.where(L2 > 0, L2, 1.0)
    t = np.clip(np.einsum("nkc,nkc->nk", w, d) / L2, 0.0, 1.0)
    diff = w - t[..., None] * d
    dist = np.sqrt(np.min(np.einsum("nkc,nkc->nk", diff, diff), axis=1))
    s = np.asarray(sign).ravel()
    phi = np.where(s < 0, -dist, dist)
    return phi.reshape(grid.shape)


@dataclass
class LevelContour:
    level: float
    polylines: list = field(default_factory=list)

    @property
    def is_empty(self):
        return len(self.polylines) == 0

    def points(self):
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate(self.polylines)


class DomainMask:
    """Implicit domain: signed distance ``phi`` negative inside, zero on the boundary."""

    def __init__(self, grid: Grid, phi):
        phi = np.array(phi, dtype=float)
        if phi.shape != grid.shape:
            raise ValueError("phi shape does not match the grid")
        self.grid = grid
        self.phi = phi
        self.phi.setflags(write=False)
        self._grad = None

    @classmethod
    def disk(cls, grid, center, radius):
        X, Y = grid.mesh()
        return cls(grid, np.hypot(X - center[0], Y - center[1]) - radius)

    @classmethod
    def from_level_function(cls, grid, values):
        """Redistance an arbitrary level function (negative inside) to a signed distance."""
        values = np.asarray(values, dtype=float)
        polys = contour_polylines(values, grid, 0.0)
        if not polys:
            raise PreconditionError("level function has no zero contour on the grid")
        return cls(grid, signed_distance_to_polylines(grid, polys, values))

    @classmethod
    def ellipse(cls, grid, a, b, center=(0.0, 0.0)):
        X, Y = grid.mesh()
        f = ((X - center[0]) / a) ** 2 + ((Y - center[1]) / b) ** 2 - 1.0
        return cls.from_level_function(grid, f * min(a, b) / 2.0)

    @property
    def inside(self):
        return self.phi < 0

    def redistance(self):
        return DomainMask.from_level_function(self.grid, self.phi)

    def margin_cells(self):
        """Number of whole cells between the domain and the grid edge."""
        idx = np.argwhere(self.inside)
        if len(idx) == 0:
            return 0
        lo = idx.min(axis=0)
        hi = idx.max(axis=0)
        return int(min(lo[0], lo[1], self.grid.nx - 1 - hi[0], self.grid.ny - 1 - hi[1]))

    def sample(self, points, fill=None):
        return sample_grid(self.phi, self.grid, points, "linear", fill)

    def _phi_grad(self):
        if self._grad is None:
            gx, gy = np.gradient(self.phi, self.grid.h, edge_order=2)
            self._grad = (gx, gy)
        return self._grad

    def normals(self, points):
        """Outward unit normals grad(phi)/|grad(phi)| at ``points``."""
        gx, gy = self._phi_grad()
        nx = sample_grid(gx, self.grid, points, "linear")
        ny = sample_grid(gy, self.grid, points, "linear")
        n = np.stack([nx, ny], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def grad_norm_stats(self, band_cells=3):
        """Min and max of |grad phi| over nodes within ``band_cells`` of the boundary."""
        gx, gy = self._phi_grad()
        g = np.hypot(gx, gy)
        sel = np.abs(self.phi) < band_cells * self.grid.h
        sel[[0, -1], :] = False
        sel[:, [0, -1]] = False
        return float(g[sel].min()), float(g[sel].max())

    def boundary_contour(self):
        return LevelContour(0.0, contour_polylines(-self.phi, self.grid, 0.0))

    def boundary_samples(self, n=None):
        """Points on the zero level with outward normals and arc-length positions.

        With ``n`` the closed polylines are resampled to ``n`` points equally
        spaced in arc length; otherwise the raw contour vertices are returned.
        """
        polys = self.boundary_contour().polylines
        if not polys:
            raise PreconditionError("mask has an empty boundary")
        if n is None:
            pts = np.concatenate(polys)
        else:
            lengths = [_closed_length(p) for p in polys]
            total = sum(lengths)
            pts = []
            for p, L in zip(polys, lengths):
                m = max(3, int(round(n * L / total)))
                pts.append(resample_closed(p, m))
            pts = np.concatenate(pts)
        return pts, self.normals(pts)


def _closed_length(poly):
    return float(np.sum(np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1)))


def resample_closed(poly, m):
    """``m`` points equally spaced in arc length along a closed polyline."""
    closed = np.vstack([poly, poly[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(m) * s[-1] / m
    x = np.interp(targets, s, closed[:, 0])
    y = np.interp(targets, s, closed[:, 1])
    return np.stack([x, y], axis=1)


class ScalarField:
    """Nodal values on a grid, optionally restricted to a DomainMask."""

    def __init__(self, grid: Grid, values, mask: Optional[DomainMask] = None):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError("values shape does not match the grid")
        if mask is not None and mask.grid != grid:
            raise ValueError("mask lives on a different grid")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self.mask = mask
        if mask is not None and not np.all(np.isfinite(values[mask.inside])):
            raise ValueError("non-finite values inside the mask")

    @property
    def h(self):
        return self.grid.h

    def sample(self, points, method="linear", fill=None):
        """Vectorised interpolation without mask checks."""
        return sample_grid(self.values, self.grid, points, method, fill)

    def interpolate(self, x, method="linear"):
        x = np.asarray(x, dtype=float)
        if self.mask is not None and self.mask.sample(x) > self.h:
            raise OutsideDomainError(f"point {tuple(x)} lies outside the domain mask")
        return float(self.sample(x, method))

    def _check_interior(self, x, cells=2):
        if self.mask is not None:
            try:
                phi = self.mask.sample(x)
            except OutsideDomainError:
                raise
            if phi > -cells * self.h:
                raise NearBoundaryError(f"point {tuple(np.asarray(x))} is within {cells} cells of the boundary")

    def gradient_at(self, points, method="linear", step=None):
        """Central differences of the interpolant; shape (..., 2). No mask checks."""
        pts = np.asarray(points, dtype=float)
        s = self.h if step is None else step
        ex = np.array([s, 0.0])
        ey = np.array([0.0, s])
        gx = (self.sample(pts + ex, method) - self.sample(pts - ex, method)) / (2 * s)
        gy = (self.sample(pts + ey, method) - self.sample(pts - ey, method)) / (2 * s)
        return np.stack([gx, gy], axis=-1)

    def laplacian_at(self, points, method="linear"):
        pts = np.asarray(points, dtype=float)
        s = self.h
        c = self.sample(pts, method)
        acc = -4.0 * c
        for e in ([s, 0.0], [-s, 0.0], [0.0, s], [0.0, -s]):
            acc = acc + self.sample(pts + np.array(e), method)
        return acc / s ** 2

    def w_at(self, points, method="linear"):
        g = self.gradient_at(points, method)
        return np.sum(g * g, axis=-1)

    def laplacian_of_w_at(self, points, method="linear"):
        pts = np.asarray(points, dtype=float)
        s = self.h
        acc = -4.0 * self.w_at(pts, method)
        for e in ([s, 0.0], [-s, 0.0], [0.0, s], [0.0, -s]):
            acc = acc + self.w_at(pts + np.array(e), method)
        return acc / s ** 2

    def gradient(self, x):
        self._check_interior(x)
        return self.gradient_at(np.asarray(x, dtype=float))

    def laplacian(self, x):
        self._check_interior(x)
        return float(self.laplacian_at(np.asarray(x, dtype=float)))

    def grad_norm_sq(self):
        """Nodal field w = |grad u|^2 from central differences."""
        gx, gy = np.gradient(self.values, self.h, edge_order=2)
        return ScalarField(self.grid, gx * gx + gy * gy, self.mask)

    def laplacian_of_w(self, x):
        self._check_interior(x, cells=3)
        return float(self.laplacian_of_w_at(np.asarray(x, dtype=float)))

    def max_value(self):
        if self.mask is not None:
            sel = self.mask.inside
            if not np.any(sel):
                raise PreconditionError("empty mask")
        else:
            sel = np.ones(self.grid.shape, dtype=bool)
        masked = np.where(sel, self.values, -np.inf)
        k = np.unravel_index(int(np.argmax(masked)), self.grid.shape)
        loc = np.array([self.grid.x[k[0]], self.grid.y[k[1]]])
        return float(masked[k]), loc

    def extract_contour(self, t):
        vmax, _ = self.max_value()
        if t >= vmax:
            return LevelContour(float(t), [])
        return LevelContour(float(t), contour_polylines(self.values, self.grid, t))


# functional wrappers around ScalarField methods

def interpolate(field: ScalarField, x, method="linear"):
    return field.interpolate(x, method)


def gradient(field: ScalarField, x):
    return field.gradient(x)


def laplacian(field: ScalarField, x):
    return field.laplacian(x)


def grad_norm_sq(field: ScalarField):
    return field.grad_norm_sq()


def laplacian_of_w(field: ScalarField, x):
    return field.laplacian_of_w(x)


def extract_contour(field: ScalarField, t):
    return field.extract_contour(t)


def max_value(field: ScalarField):
    return field.max_value()


def _directed_to_segments(points, polylines):
    pa = np.concatenate(polylines)
    pb = np.concatenate([np.roll(p, -1, axis=0) for p in polylines])
    d = pb - pa
    L2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    out = 0.0
    for chunk in np.array_split(points, max(1, len(points) // 256)):
        w = chunk[:, None, :] - pa[None]
        t = np.clip(np.einsum("nkc,kc->nk", w, d) / L2, 0, 1)
        diff = w - t[..., None] * d
        out = max(out, float(np.sqrt(np.min(np.einsum("nkc,nkc->nk", diff, diff), axis=1)).max()))
    return out


def hausdorff(a_polylines: Sequence[np.ndarray], b_polylines: Sequence[np.ndarray]):
    """Symmetric Hausdorff distance between two families of closed polylines.

    Vertices of each family are measured against the segments of the other.
    """
    if not a_polylines or not b_polylines:
        return np.inf
    return max(_directed_to_segments(np.concatenate(a_polylines), b_polylines),
               _directed_to_segments(np.concatenate(b_polylines), a_polylines))
