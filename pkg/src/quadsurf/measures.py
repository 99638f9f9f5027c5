"""Source measures: validation, mass accounting, convex support hull and grid deposition."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy.spatial import ConvexHull

from .errors import DegenerateHullError, MeasureValidationError, OutOfGridError, PreconditionError
from .fields import Grid
from .geometry import ConvexBody

# circles and disks are circumscribed by this many-gon when a polygonal hull is needed
HULL_CIRCLE_SIDES = 64
POINTS_PER_CELL_CROSSING = 16
REGION_SUBSAMPLES = 8


@dataclass(frozen=True)
class Atom:
    x: Tuple[float, float]
    mass: float


@dataclass(frozen=True)
class UniformCircle:
    center: Tuple[float, float]
    radius: float
    total_mass: float


@dataclass(frozen=True, eq=False)
class UniformRegion:
    body: ConvexBody
    total_mass: float


@dataclass(frozen=True)
class MeasureSpec:
    atoms: List[Atom] = field(default_factory=list)
    uniform_circles: List[UniformCircle] = field(default_factory=list)
    uniform_regions: List[UniformRegion] = field(default_factory=list)
    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise MeasureValidationError("only dim = 2 measures are supported")
        if not (self.atoms or self.uniform_circles or self.uniform_regions):
            raise MeasureValidationError("measure has no components")
        masses = ([a.mass for a in self.atoms] + [c.total_mass for c in self.uniform_circles]
                  + [r.total_mass for r in self.uniform_regions])
        for m in masses:
            if not (math.isfinite(m) and m > 0):
                raise MeasureValidationError(f"component masses must be positive, got {m}")
        for c in self.uniform_circles:
            if not (math.isfinite(c.radius) and c.radius > 0):
                raise MeasureValidationError(f"circle radius must be positive, got {c.radius}")
        pts = [a.x for a in self.atoms] + [c.center for c in self.uniform_circles]
        if not np.all(np.isfinite(np.asarray(pts, dtype=float))):
            raise MeasureValidationError("non-finite support coordinates")

    @classmethod
    def ring(cls, radius, mass, center=(0.0, 0.0)):
        return cls(uniform_circles=[UniformCircle(tuple(center), float(radius), float(mass))])

    @classmethod
    def from_dict(cls, d):
        try:
            dim = int(d.get("dim", 2))
            atoms = [Atom(tuple(float(v) for v in a["x"]), float(a["mass"])) for a in d.get("atoms", [])]
            circles = [UniformCircle(tuple(float(v) for v in c["center"]), float(c["radius"]),
                                     float(c["total_mass"])) for c in d.get("uniform_circles", [])]
            regions = [UniformRegion(ConvexBody.from_dict(r["body"]), float(r["total_mass"]))
                       for r in d.get("uniform_regions", [])]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MeasureValidationError):
                raise
            raise MeasureValidationError(f"malformed measure: {exc}") from exc
        return cls(atoms, circles, regions, dim)

    def to_dict(self):
        return {
            "dim": self.dim,
            "atoms": [{"x": list(a.x), "mass": a.mass} for a in self.atoms],
            "uniform_circles": [{"center": list(c.center), "radius": c.radius, "total_mass": c.total_mass}
                                for c in self.uniform_circles],
            "uniform_regions": [{"body": r.body.to_dict(), "total_mass": r.total_mass}
                                for r in self.uniform_regions],
        }

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def total_mass(spec: MeasureSpec) -> float:
    return float(sum(a.mass for a in spec.atoms) + sum(c.total_mass for c in spec.uniform_circles)
                 + sum(r.total_mass for r in spec.uniform_regions))


def support_points(spec: MeasureSpec, n_per_curve=256):
    """Finite sample of supp(spec): atoms, points on circles and region boundaries."""
    out = [np.asarray(a.x, dtype=float)[None] for a in spec.atoms]
    ang = 2 * np.pi * np.arange(n_per_curve) / n_per_curve
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    for c in spec.uniform_circles:
        out.append(np.asarray(c.center) + c.radius * ring)
    for r in spec.uniform_regions:
        if r.body.kind == "disk":
            out.append(r.body.center + r.body.radius * ring)
        else:
            out.append(r.body.vertices)
    return np.concatenate(out)


def support_hull(spec: MeasureSpec) -> ConvexBody:
    """conv(supp spec) as a disk when one disk component swallows everything, else a polygon."""
    disks = [(np.asarray(c.center, dtype=float), c.radius) for c in spec.uniform_circles]
    disks += [(r.body.center, r.body.radius) for r in spec.uniform_regions if r.body.kind == "disk"]
    pts = [np.asarray(a.x, dtype=float) for a in spec.atoms]
    pts += [v for r in spec.uniform_regions if r.body.kind == "polygon" for v in r.body.vertices]
    pts = np.array(pts).reshape(-1, 2)

    for c, r in sorted(disks, key=lambda cr: -cr[1]):
        tol = 1e-12 * max(1.0, r)
        ok = all(np.linalg.norm(c2 - c) + r2 <= r + tol for c2, r2 in disks)
        ok = ok and bool(np.all(np.linalg.norm(pts - c, axis=1) <= r + tol)) if len(pts) else ok
        if ok:
            return ConvexBody.disk(c, r)

    cloud = [pts]
    k = HULL_CIRCLE_SIDES
    ang = 2 * np.pi * np.arange(k) / k
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1) / math.cos(math.pi / k)
    for c, r in disks:
        cloud.append(c + r * ring)
    cloud = np.concatenate(cloud)
    centered = cloud - cloud.mean(axis=0)
    if len(cloud) < 3 or np.linalg.matrix_rank(centered, tol=1e-12 * max(1.0, np.abs(cloud).max())) < 2:
        raise DegenerateHullError("support of the measure is a point or a segment")
    hull = ConvexHull(cloud)
    return ConvexBody.polygon(cloud[hull.vertices])


@dataclass(eq=False)
class DiscretizedMeasure:
    grid: Grid
    density: np.ndarray
    mollification_radius: float

    @property
    def total_mass(self):
        return float(self.density.sum() * self.grid.h ** 2)

    def support(self):
        return self.density > 0


def _quartic_bump(s2, eps):
    q = 1.0 - s2 / eps ** 2
    return np.where(q > 0, q * q, 0.0)


def _deposit_bumps(density, grid, centers, masses, eps):
    """Add one bump per centre, each renormalised to its exact discrete mass."""
    h = grid.h
    reach = int(math.ceil(eps / h)) + 1
    offs = np.arange(-reach, reach + 1)
    di, dj = np.meshgrid(offs, offs, indexing="ij")
    di = di.ravel()
    dj = dj.ravel()
    fi, fj = grid.to_index(centers)
    ci = np.rint(fi).astype(int)
    cj = np.rint(fj).astype(int)
    if (ci.min() - reach < 0 or cj.min() - reach < 0 or ci.max() + reach > grid.nx - 1
            or cj.max() + reach > grid.ny - 1):
        raise OutOfGridError("measure support (plus mollification) leaves the grid")
    I = ci[:, None] + di[None]
    J = cj[:, None] + dj[None]
    px = grid.origin[0] + I * h - centers[:, 0:1]
    py = grid.origin[1] + J * h - centers[:, 1:2]
    k = _quartic_bump(px * px + py * py, eps)
    norm = k.sum(axis=1) * h * h
    k *= (masses / norm)[:, None]
    np.add.at(density, (I.ravel(), J.ravel()), k.ravel())


def deposit(spec: MeasureSpec, grid: Grid, mollification_radius=None) -> DiscretizedMeasure:
    """Realise the measure as a nonnegative density on the grid, conserving mass exactly.

    Atoms become quartic bumps of the mollification radius (default 4h);
    circles are subsampled in arc length (16 points per cell crossing) and
    each subsample becomes a bump; regions are cell-averaged.
    """
    h = grid.h
    eps = 4 * h if mollification_radius is None else float(mollification_radius)
    if eps < 2 * h * (1 - 1e-12):
        raise PreconditionError("mollification radius must be at least 2h")
    density = np.zeros(grid.shape)

    if spec.atoms:
        centers = np.array([a.x for a in spec.atoms], dtype=float)
        masses = np.array([a.mass for a in spec.atoms], dtype=float)
        _deposit_bumps(density, grid, centers, masses, eps)

    for c in spec.uniform_circles:
        n = max(64, int(math.ceil(POINTS_PER_CELL_CROSSING * 2 * math.pi * c.radius / h)))
        ang = 2 * np.pi * (np.arange(n) + 0.5) / n
        centers = np.asarray(c.center) + c.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        _deposit_bumps(density, grid, centers, np.full(n, c.total_mass / n), eps)

    for r in spec.uniform_regions:
        x0, x1, y0, y1 = r.body.bounding_box()
        i0, j0 = (int(np.floor(v)) - 1 for v in grid.to_index(np.array([x0, y0])))
        i1, j1 = (int(np.ceil(v)) + 1 for v in grid.to_index(np.array([x1, y1])))
        if i0 < 0 or j0 < 0 or i1 > grid.nx - 1 or j1 > grid.ny - 1:
            raise OutOfGridError("region support leaves the grid")
        sub = (np.arange(REGION_SUBSAMPLES) + 0.5) / REGION_SUBSAMPLES - 0.5
        su, sv = np.meshgrid(sub, sub, indexing="ij")
        I, J = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
        px = grid.origin[0] + (I[..., None, None] + su) * h
        py = grid.origin[1] + (J[..., None, None] + sv) * h
        frac = r.body.contains(np.stack([px, py], axis=-1)).mean(axis=(-1, -2))
        total = frac.sum() * h * h
        if total <= 0:
            raise PreconditionError("region is smaller than a grid cell")
        density[i0:i1 + 1, j0:j1 + 1] += frac * (r.total_mass / total)

    return DiscretizedMeasure(grid, density, eps)
