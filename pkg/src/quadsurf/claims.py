"""Numerical checks of the structural claims about overdetermined solutions.

Every checker measures a residual on one or more resolutions of the same
configuration (coarse to fine) and turns the residuals into a verdict:

* VERIFIED when the finest residual is below ``tau_pass``;
* REFUTED when the two finest residuals both exceed ``tau_fail`` and agree
  within 25% (so the discrepancy does not shrink under refinement);
* INCONCLUSIVE otherwise.

A single resolution can therefore never produce REFUTED.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .fields import DomainMask, Grid, ScalarField, hausdorff
from .geometry import (ConvexBody, NormalRay, decompose_points, lipschitz_estimate,
                       ray_body_distance, sample_outer_normals)
from .thickness import (FIELD_METHOD, FLAG_OK, boundary_grad_norm, level_thicknesses, march,
                        outer_extents, predicted_slopes, thickness_derivatives)

VERIFIED = "VERIFIED"
REFUTED = "REFUTED"
INCONCLUSIVE = "INCONCLUSIVE"

# residuals at the two finest resolutions must agree this closely for REFUTED
STABILITY = 0.25

CLAIM_ORDER = (
    "radial-monotonicity",
    "level-parametrisation",
    "differential-relation",
    "unique-decomposition",
    "subharmonicity",
    "rigidity",
    "dt-slope",
    "parallel-levels",
    "ray-linearity",
    "gnp",
)

STATEMENTS = {
    "radial-monotonicity": "r -> u(c + r nu(c)) is strictly decreasing on [0, d(c)] for every c on the boundary of C",
    "level-parametrisation": "{u = t} = {c + d_t(c) nu(c) : c on the boundary of C} for 0 <= t < max u",
    "differential-relation": "d/dt d_t(c) = -1 / |grad u(c + d_t(c) nu(c))|",
    "unique-decomposition": "every x in Omega minus C is c + r nu(c) with a unique foot c and 0 < r < d(c)",
    "subharmonicity": "w = |grad u|^2 satisfies Laplace(w) >= 0 in Omega minus C",
    "rigidity": "|grad u| = 1 on every level set {u = t}",
    "dt-slope": "d/dt d_t(c) = -1 for every c and t",
    "parallel-levels": "d_t(c) = d(c) - t, i.e. the level sets are parallel to the boundary of C",
    "ray-linearity": "u(c + r nu(c)) = d(c) - r along every outer normal ray",
    "gnp": ("C lies in Omega, d is Lipschitz, every inward normal ray of the boundary meets C, "
            "and every outer normal ray of C meets Omega in the interval (0, d(c))"),
}


@dataclass
class SamplingConfig:
    n_normals: int = 360
    levels: tuple = (0.1, 0.2, 0.5)
    tau_pass_rel: float = 5e-3
    tau_fail_rel: float = 5e-2
    exclusion_cells: int = 4
    n_points: int = 1000
    seed: int = 0
    probe_radii: tuple = (0.0, 0.2)
    method: str = FIELD_METHOD


@dataclass(eq=False)
class Case:
    """One resolution of a configuration: a field on its domain and the convex body C.

    ``support_band`` widens the exclusion zone around C for derivative checks
    (the mollification radius of a solver's source). ``probes`` maps labels to
    boundary points of the domain where the GNP ray distance is reported.
    """

    field: ScalarField
    body: ConvexBody
    support_band: float = 0.0
    probes: Dict[str, tuple] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def mask(self) -> DomainMask:
        return self.field.mask

    @property
    def h(self):
        return self.field.h

    @property
    def resolution(self):
        return int(round(1.0 / self.h))

    def max_u(self):
        if "max_u" not in self._cache:
            self._cache["max_u"] = self.field.max_value()[0]
        return self._cache["max_u"]

    def normals(self, n):
        key = ("normals", n)
        if key not in self._cache:
            samples = sample_outer_normals(self.body, n)
            pts = np.array([s.point for s in samples])
            nrm = np.array([s.normal for s in samples])
            fan = np.array([s.on_vertex_fan for s in samples])
            self._cache[key] = (pts, nrm, fan)
        return self._cache[key]

    def extents(self, n):
        key = ("extent", n)
        if key not in self._cache:
            pts, nrm, _ = self.normals(n)
            self._cache[key] = outer_extents(self.mask, pts, nrm)
        return self._cache[key]

    def thickness(self, n, t, method):
        key = ("dt", n, float(t), method)
        if key not in self._cache:
            pts, nrm, _ = self.normals(n)
            self._cache[key] = level_thicknesses(self.field, pts, nrm, float(t), method=method)
        return self._cache[key]

    def slopes(self, n, t, method):
        key = ("slope", n, float(t), method)
        if key not in self._cache:
            pts, nrm, _ = self.normals(n)
            measured, f1 = thickness_derivatives(self.field, pts, nrm, float(t), method=method)
            predicted, f2 = predicted_slopes(self.field, pts, nrm, float(t), method=method)
            self._cache[key] = (measured, predicted, np.where(f1 != FLAG_OK, f1, f2))
        return self._cache[key]


@dataclass
class Measurement:
    """Residual statistics of one checker at one resolution."""

    max: float
    mean: float
    l2: float
    samples: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict, repr=False)


@dataclass
class ClaimReport:
    claim_id: str
    statement: str
    resolutions: List[int]
    residual_max: List[float]
    residual_mean: List[float]
    residual_l2: List[float]
    tau_pass: float
    tau_fail: float
    verdict: str
    samples: dict = field(default_factory=dict)
    measurements: List[Measurement] = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "claim_id": self.claim_id,
            "paper_ref": self.statement,
            "resolutions": list(self.resolutions),
            "residual_max": list(self.residual_max),
            "residual_mean": list(self.residual_mean),
            "residual_l2": list(self.residual_l2),
            "tau_pass": self.tau_pass,
            "tau_fail": self.tau_fail,
            "verdict": self.verdict,
            "samples": self.samples,
        }


def decide(maxima: Sequence[float], tau_pass: float, tau_fail: float) -> str:
    """Refinement-stable verdict from residual maxima ordered coarse to fine."""
    if not maxima or math.isnan(maxima[-1]):
        return INCONCLUSIVE
    fine = maxima[-1]
    if fine < tau_pass:
        return VERIFIED
    if len(maxima) >= 2:
        coarse = maxima[-2]
        if fine > tau_fail and coarse > tau_fail:
            if math.isinf(fine) and math.isinf(coarse):
                return REFUTED
            if np.isfinite(fine) and np.isfinite(coarse) and abs(fine - coarse) <= STABILITY * max(fine, coarse):
                return REFUTED
    return INCONCLUSIVE


def _stats(values, samples=None, arrays=None) -> Measurement:
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if len(v) == 0:
        return Measurement(math.nan, math.nan, math.nan, samples or {}, arrays or {})
    return Measurement(float(np.max(v)), float(np.mean(v)), float(np.sqrt(np.mean(v * v))),
                       samples or {}, arrays or {})


def _as_cases(cases) -> List[Case]:
    if isinstance(cases, Case):
        cases = [cases]
    return sorted(cases, key=lambda c: -c.h)


def _levels(case: Case, config: SamplingConfig):
    """Configured levels strictly below max u."""
    m = case.max_u()
    return [float(t) for t in config.levels if 0 < t < m]


def _report(claim_id, cases, measurements, tau_pass, tau_fail, extra=None) -> ClaimReport:
    maxima = [m.max for m in measurements]
    samples = {"n_resolutions": len(cases)}
    keys = []
    for m in measurements:
        keys += [k for k in m.samples if k not in keys]
    for k in keys:
        samples[k] = [m.samples.get(k) for m in measurements]
    if extra:
        samples.update(extra)
    return ClaimReport(claim_id, STATEMENTS[claim_id], [c.resolution for c in cases], maxima,
                       [m.mean for m in measurements], [m.l2 for m in measurements],
                       float(tau_pass), float(tau_fail), decide(maxima, tau_pass, tau_fail),
                       samples, measurements)


def _value_tolerances(cases, config):
    scale = cases[-1].max_u()
    return config.tau_pass_rel * scale, config.tau_fail_rel * scale


def _unit_tolerances(config):
    return config.tau_pass_rel, config.tau_fail_rel


def _length_tolerances(cases, config):
    """Two cells at the finest grid to pass; a fraction of the largest extent to fail."""
    case = cases[-1]
    d, _, _ = case.extents(config.n_normals)
    return 2 * case.h, config.tau_fail_rel * float(np.nanmax(d))


def _flag_count(flags):
    return int(np.sum(np.asarray(flags) != FLAG_OK))


# -- value claims -------------------------------------------------------------


def measure_radial_monotonicity(case: Case, config: SamplingConfig) -> Measurement:
    pts, nrm, _ = case.normals(config.n_normals)
    m = march(case.field, case.mask, pts, nrm, case.h / 2, config.method)
    valid = m.valid()
    # only steps that stay within [0, d(c)]
    inside = valid & (np.arange(m.values.shape[1])[None, :] < m.exit_index[:, None])
    # largest rise above the running minimum, independent of the step size
    vals = np.where(inside, m.values, np.inf)
    run_min = np.minimum.accumulate(vals, axis=1)
    rise = np.where(inside, vals - run_min, 0.0)
    worst = np.max(rise, axis=1, initial=0.0)
    unbounded = m.exit_index < 0
    worst[unbounded] = np.nan
    return _stats(worst, {"unbounded_rays": int(unbounded.sum())}, {"per_ray": worst})


def check_radial_monotonicity(cases, config: SamplingConfig = None) -> ClaimReport:
    """Largest increase of u along any outer normal ray between c and the boundary."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_radial_monotonicity(c, config) for c in cases]
    return _report("radial-monotonicity", cases, ms, *_value_tolerances(cases, config))


def measure_parallel_levels(case: Case, config: SamplingConfig) -> Measurement:
    d, fd, _ = case.extents(config.n_normals)
    per_level = {}
    res = []
    flagged = 0
    for t in _levels(case, config):
        dt, f = case.thickness(config.n_normals, t, config.method)
        r = np.abs(dt - (d - t))
        r[f != FLAG_OK] = np.nan
        flagged += _flag_count(f)
        res.append(r)
        per_level[f"{t:g}"] = float(np.nanmax(r)) if np.any(np.isfinite(r)) else None
    res = np.concatenate(res) if res else np.array([np.nan])
    return _stats(res, {"per_level": per_level, "flagged": flagged})


def check_parallel_levels(cases, config: SamplingConfig = None) -> ClaimReport:
    """max |d_t(c) - (d(c) - t)| over normal samples and levels."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_parallel_levels(c, config) for c in cases]
    return _report("parallel-levels", cases, ms, *_value_tolerances(cases, config),
                   extra={"levels": list(_levels(cases[-1], config))})


def measure_ray_linearity(case: Case, config: SamplingConfig) -> Measurement:
    pts, nrm, _ = case.normals(config.n_normals)
    d, fd, _ = case.extents(config.n_normals)
    m = march(case.field, case.mask, pts, nrm, case.h / 2, config.method)
    r = m.radii[None, :]
    within = r <= d[:, None]
    res = np.where(within, np.abs(m.values - (d[:, None] - r)), np.nan)
    res[fd != FLAG_OK] = np.nan
    probes = {}
    for rp in config.probe_radii:
        ok = d > rp
        if not np.any(ok):
            probes[f"{rp:g}"] = None
            continue
        u = case.field.sample(pts[ok] + rp * nrm[ok], config.method)
        probes[f"{rp:g}"] = float(np.max(np.abs(u - (d[ok] - rp))))
    with np.errstate(invalid="ignore"):
        per_ray = np.nanmax(np.where(np.isfinite(res), res, -np.inf), axis=1)
    per_ray[~np.isfinite(per_ray)] = np.nan
    return _stats(per_ray, {"per_radius": probes}, {"per_ray": per_ray})


def check_ray_linearity(cases, config: SamplingConfig = None) -> ClaimReport:
    """max |u(c + r nu(c)) - (d(c) - r)| over rays and radii 0 <= r <= d(c)."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_ray_linearity(c, config) for c in cases]
    return _report("ray-linearity", cases, ms, *_value_tolerances(cases, config),
                   extra={"probe_radii": list(config.probe_radii)})


# -- slope and gradient claims --------------------------------------------------


def measure_differential_relation(case: Case, config: SamplingConfig) -> Measurement:
    per_level = {}
    res = []
    flagged = 0
    for t in _levels(case, config):
        measured, predicted, f = case.slopes(config.n_normals, t, config.method)
        r = np.abs(measured - predicted)
        r[f != FLAG_OK] = np.nan
        flagged += _flag_count(f)
        res.append(r)
        per_level[f"{t:g}"] = float(np.nanmax(r)) if np.any(np.isfinite(r)) else None
    res = np.concatenate(res) if res else np.array([np.nan])
    return _stats(res, {"per_level": per_level, "flagged": flagged})


def check_differential_relation(cases, config: SamplingConfig = None) -> ClaimReport:
    """max |measured d/dt d_t - (-1/|grad u|)| at the level points."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_differential_relation(c, config) for c in cases]
    return _report("differential-relation", cases, ms, *_unit_tolerances(config),
                   extra={"levels": list(_levels(cases[-1], config))})


def measure_dt_slope(case: Case, config: SamplingConfig) -> Measurement:
    per_level = {}
    mean_slope = {}
    res = []
    for t in _levels(case, config):
        measured, _, f = case.slopes(config.n_normals, t, config.method)
        ok = f == FLAG_OK
        r = np.where(ok, np.abs(measured + 1.0), np.nan)
        res.append(r)
        per_level[f"{t:g}"] = float(np.nanmax(r)) if np.any(ok) else None
        mean_slope[f"{t:g}"] = float(np.mean(measured[ok])) if np.any(ok) else None
    res = np.concatenate(res) if res else np.array([np.nan])
    return _stats(res, {"per_level": per_level, "measured_slope": mean_slope})


def check_dt_slope(cases, config: SamplingConfig = None) -> ClaimReport:
    """max |measured d/dt d_t + 1| over samples and levels."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_dt_slope(c, config) for c in cases]
    return _report("dt-slope", cases, ms, *_unit_tolerances(config),
                   extra={"levels": list(_levels(cases[-1], config))})


def measure_rigidity(case: Case, config: SamplingConfig) -> Measurement:
    pts, nrm, _ = case.normals(config.n_normals)
    d, fd, _ = case.extents(config.n_normals)
    per_level = {}
    res = []
    ok = fd == FLAG_OK
    g0 = np.full(len(pts), np.nan)
    g0[ok] = boundary_grad_norm(case.field, pts[ok] + d[ok, None] * nrm[ok])
    r0 = np.abs(g0 - 1.0)
    res.append(r0)
    per_level["0"] = float(np.nanmax(r0)) if np.any(ok) else None
    for t in _levels(case, config):
        dt, f = case.thickness(config.n_normals, t, config.method)
        good = f == FLAG_OK
        r = np.full(len(pts), np.nan)
        if np.any(good):
            lp = pts[good] + dt[good, None] * nrm[good]
            g = np.linalg.norm(case.field.gradient_at(lp, config.method), axis=-1)
            r[good] = np.abs(g - 1.0)
        res.append(r)
        per_level[f"{t:g}"] = float(np.nanmax(r)) if np.any(good) else None
    return _stats(np.concatenate(res), {"per_level": per_level})


def check_rigidity(cases, config: SamplingConfig = None) -> ClaimReport:
    """max ||grad u| - 1| on the boundary (t = 0) and on the level sets."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_rigidity(c, config) for c in cases]
    return _report("rigidity", cases, ms, *_unit_tolerances(config),
                   extra={"levels": [0.0] + list(_levels(cases[-1], config))})


def measure_subharmonicity(case: Case, config: SamplingConfig) -> Measurement:
    grid = case.field.grid
    h = grid.h
    band = config.exclusion_cells * h
    w = case.field.grad_norm_sq().values
    lap = np.full(grid.shape, np.nan)
    lap[1:-1, 1:-1] = (w[2:, 1:-1] + w[:-2, 1:-1] + w[1:-1, 2:] + w[1:-1, :-2]
                       - 4 * w[1:-1, 1:-1]) / h ** 2
    X, Y = grid.mesh()
    nodes = np.stack([X, Y], axis=-1)
    sel = (case.mask.phi < -band) & (case.body.signed_distance(nodes) > band + case.support_band)
    if not np.any(sel):
        return Measurement(math.nan, math.nan, math.nan, {"nodes": 0})
    vals = lap[sel]
    neg = np.maximum(0.0, -vals)
    m = _stats(neg, {"nodes": int(sel.sum()), "min_laplacian_w": float(np.min(vals))})
    m.max = float(max(0.0, -np.min(vals)))
    return m


def check_subharmonicity(cases, config: SamplingConfig = None) -> ClaimReport:
    """max(0, -min Laplace(|grad u|^2)) over grid nodes away from both boundaries."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_subharmonicity(c, config) for c in cases]
    return _report("subharmonicity", cases, ms, *_unit_tolerances(config),
                   extra={"exclusion_cells": config.exclusion_cells})


# -- geometric claims ---------------------------------------------------------


def _reconstruction(pts, nrm, d):
    ok = np.isfinite(d)
    return [(pts + d[:, None] * nrm)[ok]] if np.sum(ok) >= 3 else []


def measure_level_parametrisation(case: Case, config: SamplingConfig) -> Measurement:
    pts, nrm, _ = case.normals(config.n_normals)
    d, _, _ = case.extents(config.n_normals)
    per_level = {}
    recon = _reconstruction(pts, nrm, d)
    contour = case.mask.boundary_contour().polylines
    per_level["0"] = hausdorff(recon, contour) if recon and contour else math.inf
    for t in _levels(case, config):
        dt, f = case.thickness(config.n_normals, t, config.method)
        recon = _reconstruction(pts, nrm, np.where(f == FLAG_OK, dt, np.nan))
        contour = case.field.extract_contour(t).polylines
        per_level[f"{t:g}"] = hausdorff(recon, contour) if recon and contour else math.inf
    vals = np.array(list(per_level.values()))
    m = Measurement(float(np.max(vals)), float(np.mean(vals)), float(np.sqrt(np.mean(vals ** 2))),
                    {"per_level": per_level})
    return m


def check_level_parametrisation(cases, config: SamplingConfig = None) -> ClaimReport:
    """Hausdorff distance between {c + d_t(c) nu(c)} and the marching-squares level set."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_level_parametrisation(c, config) for c in cases]
    return _report("level-parametrisation", cases, ms, *_length_tolerances(cases, config),
                   extra={"levels": [0.0] + list(_levels(cases[-1], config))})


def measure_unique_decomposition(case: Case, config: SamplingConfig) -> Measurement:
    grid = case.field.grid
    x0, x1, y0, y1 = grid.extent
    sampler = qmc.Halton(d=2, scramble=True, seed=config.seed)
    pool = []
    need = config.n_points
    lo = np.array([x0, y0])
    span = np.array([x1 - x0, y1 - y0])
    for _ in range(64):
        cand = lo + span * sampler.random(4 * need)
        keep = (case.mask.sample(cand) < 0) & (case.body.signed_distance(cand) > 0)
        pool.append(cand[keep])
        if sum(len(p) for p in pool) >= need:
            break
    x = np.concatenate(pool)[:need]
    feet, radii, normals = decompose_points(x, case.body)
    round_trip = np.linalg.norm(feet + radii[:, None] * normals - x, axis=1)
    ext, flags, _ = outer_extents(case.mask, feet, normals)
    tol = case.h
    with np.errstate(invalid="ignore"):
        uncovered = (flags != FLAG_OK) | ~(radii < ext + tol)
    coverage = float(np.mean(uncovered)) if len(x) else math.nan

    # boundary consistency: points on the domain boundary sit at radius d(c)
    bpts, _ = case.mask.boundary_samples(config.n_normals)
    bfeet, bradii, bnormals = decompose_points(bpts, case.body)
    bext, bflags, _ = outer_extents(case.mask, bfeet, bnormals)
    ok = bflags == FLAG_OK
    boundary_gap = float(np.max(np.abs(bradii[ok] - bext[ok]))) if np.any(ok) else math.nan

    rt = float(np.max(round_trip)) if len(x) else math.nan
    return Measurement(max(rt, coverage), float(np.mean(round_trip)),
                       float(np.sqrt(np.mean(round_trip ** 2))),
                       {"points": int(len(x)), "round_trip_max": rt,
                        "coverage_failures": int(np.sum(uncovered)), "boundary_radius_gap": boundary_gap},
                       {"points": x, "uncovered": uncovered})


def check_unique_decomposition(cases, config: SamplingConfig = None) -> ClaimReport:
    """Round-trip error of x -> (c, r) -> c + r nu(c) plus the fraction of points with r >= d(c)."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_unique_decomposition(c, config) for c in cases]
    return _report("unique-decomposition", cases, ms, *_unit_tolerances(config),
                   extra={"seed": config.seed})


def measure_gnp(case: Case, config: SamplingConfig) -> Measurement:
    pts, nrm, fan = case.normals(config.n_normals)
    d, fd, reenter = case.extents(config.n_normals)

    # P1: C inside Omega
    p1 = max(0.0, float(np.max(case.mask.sample(pts, fill=np.inf))))

    # P2: Lipschitz constant of d over distinct boundary points of C
    keep = ~fan & np.isfinite(d)
    lip = lipschitz_estimate(pts[keep], d[keep]) if np.sum(keep) >= 2 else None

    # P3: inward normal rays of the domain boundary against C
    bpts, bnrm = case.mask.boundary_samples(config.n_normals)
    p3 = np.array([ray_body_distance(NormalRay(p, -n / np.linalg.norm(n)), case.body)
                   for p, n in zip(bpts, bnrm)])
    probes = {}
    for label, q in sorted(case.probes.items()):
        k = int(np.argmin(np.linalg.norm(bpts - np.asarray(q), axis=1)))
        probes[label] = float(p3[k])

    # P4: outer rays of C whose trace in Omega is not the single interval (0, d(c))
    bad = reenter | (fd != FLAG_OK)
    p4 = float(np.mean(bad))

    lip_const = None if lip is None else (math.inf if lip.infinite else lip.constant)
    resid = max(p1, float(np.max(p3)), p4)
    if lip is None or lip.infinite:
        resid = math.inf
    return Measurement(resid, float(np.mean(p3)), float(np.sqrt(np.mean(p3 ** 2))),
                       {"p1": p1, "p2_lipschitz": lip_const, "p3_max": float(np.max(p3)),
                        "p4_fraction": p4, "p3_probes": probes},
                       {"boundary_points": bpts, "p3": p3, "d": d})


def check_gnp(cases, config: SamplingConfig = None) -> ClaimReport:
    """Geometric normal property of the domain with respect to C, P1 to P4."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    ms = [measure_gnp(c, config) for c in cases]
    return _report("gnp", cases, ms, *_length_tolerances(cases, config))


CHECKERS = {
    "radial-monotonicity": check_radial_monotonicity,
    "level-parametrisation": check_level_parametrisation,
    "differential-relation": check_differential_relation,
    "unique-decomposition": check_unique_decomposition,
    "subharmonicity": check_subharmonicity,
    "rigidity": check_rigidity,
    "dt-slope": check_dt_slope,
    "parallel-levels": check_parallel_levels,
    "ray-linearity": check_ray_linearity,
    "gnp": check_gnp,
}


def run_suite(cases, config: SamplingConfig = None) -> List[ClaimReport]:
    """Every checker over the same cases, in fixed claim order."""
    config = config or SamplingConfig()
    cases = _as_cases(cases)
    return [CHECKERS[cid](cases, config) for cid in CLAIM_ORDER]


# -- scenarios ------------------------------------------------------------------

SCENARIOS = ("oracle-annulus", "solver-ring", "ellipse-control")


def oracle_case(n, rho=0.25, R=1.0) -> Case:
    from .oracle import annulus_solution, sample_to_grid

    sol = annulus_solution(2, rho, R)
    grid = sol.grid(1.0 / n)
    mask = sol.mask(grid)
    return Case(sample_to_grid(sol, grid, mask), sol.body(), meta={"rho": rho, "R": R})


def solver_ring_case(n, rho=0.25, init_radius=1.3, params=None) -> Case:
    from .freeboundary import FreeBoundaryParams, solve_quadrature_surface
    from .measures import MeasureSpec, support_hull

    measure = MeasureSpec.ring(rho, 2 * math.pi)
    h = 1.0 / n
    reach = max(init_radius, 1.0) * 1.15
    grid = Grid.covering(-reach, reach, -reach, reach, h)
    init = DomainMask.disk(grid, (0.0, 0.0), init_radius)
    surf = solve_quadrature_surface(measure, init, params or FreeBoundaryParams())
    field = ScalarField(grid, surf.field.values, surf.mask)
    return Case(field, support_hull(measure), support_band=4 * h,
                meta={"rho": rho, "init_radius": init_radius, "converged": surf.converged,
                      "iterations": len(surf.history), "final_residual": surf.history[-1].max_res})


def ellipse_case(n, a=2.0, b=0.5, c_radius=0.05) -> Case:
    from .measures import MeasureSpec, deposit
    from .poisson import solve_dirichlet

    h = 1.0 / n
    grid = Grid.covering(-a, a, -b, b, h)
    mask = DomainMask.ellipse(grid, a, b)
    # mass equal to the perimeter, so the mean of |du/dn| is one
    perimeter = sum(float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))
                    for p in mask.boundary_contour().polylines)
    measure = MeasureSpec.ring(c_radius, perimeter)
    u = solve_dirichlet(mask, deposit(measure, grid))
    theta = math.pi / 4
    probes = {"theta=pi/4": (a * math.cos(theta), b * math.sin(theta))}
    return Case(u, ConvexBody.disk((0.0, 0.0), c_radius), support_band=4 * h, probes=probes,
                meta={"a": a, "b": b, "c_radius": c_radius})


def build_cases(scenario: str, grids=(64, 128), **params) -> List[Case]:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    if len(grids) == 0:
        raise ValueError("need at least one grid resolution")
    make = {"oracle-annulus": oracle_case, "solver-ring": solver_ring_case,
            "ellipse-control": ellipse_case}[scenario]
    return [make(int(n), **params) for n in sorted(grids)]


def run_all(scenario: str, grids=(64, 128), config: SamplingConfig = None, **params) -> List[ClaimReport]:
    """Build the scenario at every resolution and run the full suite."""
    return run_suite(build_cases(scenario, grids, **params), config)


def report_by_id(reports: Sequence[ClaimReport]) -> Dict[str, ClaimReport]:
    return {r.claim_id: r for r in reports}
