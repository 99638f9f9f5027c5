"""Trial free-boundary iteration for the overdetermined problem.

Each step solves the Dirichlet problem on the current domain, measures the
boundary residual |du/dn| - 1 and moves the boundary along its outward
normal by a clamped multiple of that residual (outward where the gradient
is too steep). The level set is redistanced after every move.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.spatial import cKDTree

from .errors import CollapseError, DivergenceError, PreconditionError
from .fields import DomainMask, ScalarField, _closed_length, resample_closed
from .geometry import sample_outer_normals
from .measures import MeasureSpec, deposit, support_hull
from .poisson import DEFAULT_TOL, _normal_derivative_at, boundary_normal_derivative, solve_dirichlet

log = logging.getLogger(__name__)


@dataclass
class ResidualStats:
    points: np.ndarray
    residuals: np.ndarray
    flags: np.ndarray
    max: float
    mean: float
    l2: float


def overdetermined_residual(field: ScalarField, mask: DomainMask, samples=None) -> ResidualStats:
    """Per-sample |du/dn| - 1 on the boundary with max |.|, signed mean and rms."""
    bd = boundary_normal_derivative(field, mask, samples)
    res = np.abs(bd.dudn) - 1.0
    return ResidualStats(bd.points, res, bd.flags, float(np.max(np.abs(res))),
                         float(np.mean(res)), float(np.sqrt(np.mean(res ** 2))))


@dataclass
class IterationRecord:
    iteration: int
    max_res: float
    mean_res: float
    mean_radius: float
    mean_velocity: float


@dataclass
class FreeBoundaryParams:
    step: float = 0.4
    max_iter: int = 200
    stop_residual: float = 0.02
    length_scale: float = 1.0
    clamp_cells: float = 0.5
    smoothing_length: float = 0.25
    solver_tol: float = DEFAULT_TOL


@dataclass
class QuadratureSurface:
    mask: DomainMask
    field: ScalarField
    history: List[IterationRecord] = field(default_factory=list)
    converged: bool = False

    def boundary_radii(self, center=(0.0, 0.0)):
        pts = self.mask.boundary_contour().points()
        return np.linalg.norm(pts - np.asarray(center), axis=1)


def smooth_closed(values, spacing, length):
    """H1 filter (1 + length^2 k^2)^-1 of periodic samples equally spaced in arc length."""
    if length <= 0:
        return values
    k = 2 * np.pi * np.fft.rfftfreq(len(values), d=spacing)
    return np.fft.irfft(np.fft.rfft(values) / (1.0 + (length * k) ** 2), n=len(values))


def boundary_velocity(field: ScalarField, mask: DomainMask, params: "FreeBoundaryParams"):
    """Smoothed, clamped normal velocity on uniformly resampled boundary points."""
    h = mask.grid.h
    pts_all, vel_all, res_all = [], [], []
    for poly in mask.boundary_contour().polylines:
        L = _closed_length(poly)
        n = max(16, int(np.ceil(2 * L / h)))
        pts = resample_closed(poly, n)
        res = np.abs(_normal_derivative_at(field, mask, pts)) - 1.0
        v = params.step * params.length_scale * smooth_closed(res, L / n, params.smoothing_length * params.length_scale)
        clamp = params.clamp_cells * h
        pts_all.append(pts)
        vel_all.append(np.clip(v, -clamp, clamp))
        res_all.append(res)
    return np.concatenate(pts_all), np.concatenate(vel_all), np.concatenate(res_all)


def _extend_to_nodes(grid, phi, pts, values, band_cells=3):
    # nodes farther than the clamp cannot change sign, so only a band is needed
    out = np.zeros(grid.shape)
    near = np.abs(phi) < band_cells * grid.h
    X, Y = grid.mesh()
    _, idx = cKDTree(pts).query(np.stack([X[near], Y[near]], axis=1))
    out[near] = values[idx]
    return out


def _diverging(history):
    if len(history) < 4:
        return False
    r = [h.max_res for h in history[-4:]]
    return r[1] > r[0] and r[2] > r[1] and r[3] > r[2] and r[3] > history[0].max_res


def solve_quadrature_surface(measure: MeasureSpec, init_mask: DomainMask,
                             params: FreeBoundaryParams = None, mollification_radius=None,
                             callback=None) -> QuadratureSurface:
    """Iterate towards a domain with |du/dn| = 1 on its boundary.

    Returns the last (mask, field) pair and the residual history whether or
    not ``stop_residual`` was reached; ``converged`` tells which.
    """
    params = params or FreeBoundaryParams()
    grid = init_mask.grid
    h = grid.h
    body = support_hull(measure)
    rhs = deposit(measure, grid, mollification_radius)
    source = rhs.density > 0
    body_pts = np.array([s.point for s in sample_outer_normals(body, 360)])
    if np.any(init_mask.sample(body_pts) >= 0):
        raise PreconditionError("support hull is not strictly inside the initial domain")

    mask = init_mask
    history: List[IterationRecord] = []
    for it in range(params.max_iter):
        u = solve_dirichlet(mask, rhs, tol=params.solver_tol)
        stats = overdetermined_residual(u, mask)
        radius = float(np.mean(np.linalg.norm(stats.points - body_center(body), axis=1)))
        vpts, vel, _ = boundary_velocity(u, mask, params)
        rec = IterationRecord(it, stats.max, stats.mean, radius, float(np.mean(vel)))
        history.append(rec)
        log.info("iter %d: max residual %.4e mean %.4e radius %.5f", it, stats.max, stats.mean, radius)
        if callback is not None:
            callback(rec, mask, u)
        if stats.max <= params.stop_residual:
            return QuadratureSurface(mask, u, history, True)
        if _diverging(history):
            raise DivergenceError("residual increased three times in a row above its initial value", history)
        if it == params.max_iter - 1:
            break
        phi = mask.phi - _extend_to_nodes(grid, mask.phi, vpts, vel)
        mask = DomainMask.from_level_function(grid, phi)
        new_pts = mask.boundary_contour().points()
        clearance = float(np.min(body.signed_distance(new_pts)))
        if clearance < 4 * h or np.any(mask.sample(body_pts) >= 0):
            raise CollapseError(f"boundary came within {clearance:.4g} of the support hull", history)
        # the mollified source also needs room, or the next solve is ill-posed
        source_clearance = -float(np.max(mask.phi[source]))
        if source_clearance < 2 * rhs.mollification_radius:
            raise CollapseError(f"boundary came within {source_clearance:.4g} of the mollified source", history)
        if mask.margin_cells() < 4:
            raise PreconditionError("domain grew to within 4 cells of the grid edge")
    return QuadratureSurface(mask, u, history, False)


def body_center(body):
    if body.kind == "disk":
        return body.center
    return body.vertices.mean(axis=0)
