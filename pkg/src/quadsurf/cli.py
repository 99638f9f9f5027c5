"""Command-line entry points: oracle, solve, verify, sweep.

Exit codes: 0 success, 2 usage or validation error, 3 solver did not
converge, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import io as qio
from .errors import CollapseError, DivergenceError, QuadsurfError, SolverFailure

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4

log = logging.getLogger("quadsurf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return vals


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    return vals


def _prepare_out(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def _thread_limit():
    n = os.environ.get("QUADSURF_THREADS")
    if not n:
        return nullcontext()
    try:
        n = int(n)
    except ValueError:
        raise UsageError(f"QUADSURF_THREADS must be an integer, got {n!r}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, n))


# -- oracle -------------------------------------------------------------------


def cmd_oracle(args):
    from .oracle import annulus_solution, sample_to_grid

    if not (0 < args.rho < args.R):
        raise UsageError(f"need 0 < rho < R, got rho={args.rho}, R={args.R}")
    if args.grid < 16:
        raise UsageError("grid must be at least 16 cells per unit length")
    sol = annulus_solution(2, args.rho, args.R)
    grid = sol.grid(1.0 / args.grid)
    mask = sol.mask(grid)
    field = sample_to_grid(sol, grid, mask)
    out = _prepare_out(args.out)
    with qio.output_lock(out):
        qio.save_run(out, field, sol.body(), "oracle",
                     {"rho": args.rho, "R": args.R, "resolution": args.grid, "max_u": sol.max_u})
    print(f"wrote oracle run to {out}")
    return EXIT_OK


# -- solve --------------------------------------------------------------------


def cmd_solve(args):
    from .fields import DomainMask, Grid
    from .freeboundary import FreeBoundaryParams, body_center, overdetermined_residual, solve_quadrature_surface
    from .measures import MeasureSpec, support_hull

    if args.grid < 16:
        raise UsageError("grid must be at least 16 cells per unit length")
    try:
        measure = MeasureSpec.load(args.measure)
    except FileNotFoundError:
        raise UsageError(f"measure file not found: {args.measure}")
    body = support_hull(measure)
    if args.init_circle is not None:
        if len(args.init_circle) != 3 or args.init_circle[2] <= 0:
            raise UsageError("--init-circle needs cx,cy,r with r > 0")
        c = np.array(args.init_circle[:2])
        radius = args.init_circle[2]
    else:
        c = body_center(body)
        radius = args.init
    h = 1.0 / args.grid
    reach = radius * 1.15
    grid = Grid.covering(c[0] - reach, c[0] + reach, c[1] - reach, c[1] + reach, h)
    init = DomainMask.disk(grid, c, radius)
    params = FreeBoundaryParams(step=args.step, max_iter=args.max_iter, stop_residual=args.stop_residual,
                                length_scale=args.length_scale)
    if params.max_iter < 1:
        raise UsageError("max-iter must be at least 1")
    out = _prepare_out(args.out)
    with qio.output_lock(out):
        try:
            surf = solve_quadrature_surface(measure, init, params)
        except (CollapseError, DivergenceError) as exc:
            qio.write_history_csv(out / "history.csv", exc.history)
            raise
        stats = overdetermined_residual(surf.field, surf.mask)
        radii = surf.boundary_radii(c)
        qio.write_history_csv(out / "history.csv", surf.history)
        measure.save(out / "measure.json")
        summary = {"converged": surf.converged, "iterations": len(surf.history),
                   "max_residual": stats.max, "mean_residual": stats.mean, "l2_residual": stats.l2,
                   "radius_min": float(radii.min()), "radius_max": float(radii.max()),
                   "radius_mean": float(radii.mean())}
        qio.dump_json(out / "summary.json", summary)
        qio.save_run(out, surf.field, body, "solve",
                     {"resolution": args.grid, "init_center": list(c), "init_radius": radius, "converged": surf.converged,
                      "files_extra": ["history.csv", "summary.json", "measure.json"]})
    print(f"{'converged' if surf.converged else 'not converged'} after {len(surf.history)} iterations, "
          f"max residual {stats.max:.4g}")
    return EXIT_OK if surf.converged else EXIT_NOT_CONVERGED


# -- verify -------------------------------------------------------------------


def _cases_from_runs(dirs):
    from .claims import Case

    cases = []
    for d in dirs:
        try:
            field, body, manifest = qio.load_run(d)
        except FileNotFoundError as exc:
            raise UsageError(f"run directory {d} is incomplete: {exc}")
        band = 4 * field.h if manifest.get("kind") == "solve" else 0.0
        cases.append(Case(field, body, support_band=band, meta={"run_dir": str(d)}))
    return cases


def _write_artifacts(out, cases, config, prefix=""):
    from .fields import LevelContour
    from .thickness import build_table

    finest = cases[-1]
    levels = [t for t in config.levels if t < finest.max_u()]
    # thickness.csv holds the finest grid; every grid also gets thickness_<n>.csv
    for case in cases:
        table = build_table(case.field, case.mask, case.body, config.n_normals, levels)
        qio.write_table_csv(out / f"{prefix}thickness_{case.resolution}.csv", table)
    qio.write_table_csv(out / f"{prefix}thickness.csv", table)
    contours = [LevelContour(0.0, finest.mask.boundary_contour().polylines)]
    contours += [finest.field.extract_contour(t) for t in levels]
    recon = []
    for j, t in enumerate(table.levels):
        d = table.d[:, j]
        ok = np.isfinite(d)
        recon.append((t, (table.points + d[:, None] * table.normals)[ok]))
    qio.write_contours_csv(out / f"{prefix}contours.csv", contours)
    qio.write_svg(out / f"{prefix}contours.svg", finest.field.grid, contours, recon, finest.body)


def cmd_verify(args):
    from .claims import SCENARIOS, SamplingConfig, build_cases, run_suite

    if bool(args.scenario) == bool(args.run_dir):
        raise UsageError("give exactly one of --scenario or --run-dir")
    if args.scenario and args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    if not args.grids or any(g < 16 for g in args.grids):
        raise UsageError("grids must be a non-empty list of integers >= 16")
    config = SamplingConfig(n_normals=args.n_normals, levels=tuple(args.levels))
    out = _prepare_out(args.out)
    with qio.output_lock(out):
        if args.scenario:
            cases = build_cases(args.scenario, args.grids)
        else:
            cases = _cases_from_runs(args.run_dir)
        reports = run_suite(cases, config)
        payload = {"scenario": args.scenario or "run-dir",
                   "resolutions": [c.resolution for c in sorted(cases, key=lambda c: -c.h)],
                   "config": {"n_normals": config.n_normals, "levels": list(config.levels),
                              "tau_pass_rel": config.tau_pass_rel, "tau_fail_rel": config.tau_fail_rel,
                              "exclusion_cells": config.exclusion_cells, "seed": config.seed},
                   "claims": [r.to_dict() for r in reports]}
        qio.dump_json(out / "report.json", payload)
        _write_artifacts(out, sorted(cases, key=lambda c: -c.h), config)
    for r in reports:
        print(f"{r.claim_id:24s} {r.verdict:13s} " + " ".join(qio.fmt(v) for v in r.residual_max))
    return EXIT_OK


# -- sweep --------------------------------------------------------------------


def cmd_sweep(args):
    from .claims import SamplingConfig, build_cases, run_suite

    if not args.rho or not args.R or not args.grids:
        raise UsageError("parameter set is empty; give --rho, --R and --grids")
    if any(g < 16 for g in args.grids):
        raise UsageError("grids must be integers >= 16")
    if args.scenario not in ("oracle-annulus", "solver-ring"):
        raise UsageError("sweep supports the oracle-annulus and solver-ring scenarios")
    config = SamplingConfig(n_normals=args.n_normals, levels=tuple(args.levels))
    level_cols = [f"res_t={qio.fmt(t)}" for t in config.levels]
    probe_cols = [f"res_r={qio.fmt(r)}" for r in config.probe_radii]
    out = _prepare_out(args.out)
    combos = [(rho, R) for rho in args.rho for R in args.R]
    for rho, R in combos:
        if not (0 < rho < R):
            raise UsageError(f"need 0 < rho < R, got rho={rho}, R={R}")
    rows = []
    with qio.output_lock(out):
        for rho, R in combos:
            params = {"rho": rho, "R": R} if args.scenario == "oracle-annulus" else {"rho": rho}
            reports = run_suite(build_cases(args.scenario, args.grids, **params), config)
            for rep in reports:
                for k, res in enumerate(rep.resolutions):
                    per_level = (rep.samples.get("per_level") or [{}] * len(rep.resolutions))[k] or {}
                    per_r = (rep.samples.get("per_radius") or [{}] * len(rep.resolutions))[k] or {}
                    row = [rep.claim_id, qio.fmt(rho), qio.fmt(R), res, qio.fmt(1.0 / res),
                           qio.fmt(rep.residual_max[k]), qio.fmt(rep.residual_mean[k]), rep.verdict]
                    row += [qio.fmt(per_level[f"{t:g}"]) if per_level.get(f"{t:g}") is not None else ""
                            for t in config.levels]
                    row += [qio.fmt(per_r[f"{r:g}"]) if per_r.get(f"{r:g}") is not None else ""
                            for r in config.probe_radii]
                    rows.append(row)
        rows.sort(key=lambda r: (r[0], float(r[1]), float(r[2]), r[3]))
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["claim_id", "rho", "R", "grid", "h", "residual_max", "residual_mean", "verdict"]
                       + level_cols + probe_cols)
            w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser():
    p = _Parser(prog="quadsurf", description="Quadrature-surface solvers and claim checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    o = sub.add_parser("oracle", help="write the analytic annulus solution on a grid")
    o.add_argument("--rho", type=float, required=True)
    o.add_argument("--R", type=float, required=True)
    o.add_argument("--grid", type=int, required=True, help="cells per unit length (h = 1/grid)")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("solve", help="trial free-boundary iteration for a measure")
    s.add_argument("--measure", required=True, help="measure JSON file")
    s.add_argument("--grid", type=int, default=128)
    s.add_argument("--init", type=float, default=1.3, help="radius of the initial circle around the hull centre")
    s.add_argument("--init-circle", type=_float_list, help="initial circle as cx,cy,r")
    s.add_argument("--step", type=float, default=0.4)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--stop-residual", type=float, default=0.02)
    s.add_argument("--length-scale", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run the claim suite on a scenario or saved runs")
    v.add_argument("--scenario")
    v.add_argument("--run-dir", action="append", help="saved run directory; repeat for more resolutions")
    v.add_argument("--grids", type=_int_list, default=[64, 128])
    v.add_argument("--levels", type=_float_list, default=[0.1, 0.2, 0.5])
    v.add_argument("--n-normals", type=int, default=360)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="claim residuals over a grid of (rho, R, h)")
    w.add_argument("--scenario", default="oracle-annulus")
    w.add_argument("--rho", type=_float_list, default=[0.25])
    w.add_argument("--R", type=_float_list, default=[1.0])
    w.add_argument("--grids", type=_int_list, default=[64, 128])
    w.add_argument("--levels", type=_float_list, default=[0.1, 0.2, 0.5])
    w.add_argument("--n-normals", type=int, default=360)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"quadsurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except UsageError as exc:
        print(f"quadsurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except qio.OutputLockedError as exc:
        print(f"quadsurf: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverFailure, CollapseError, DivergenceError) as exc:
        print(f"quadsurf: solver failure: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (QuadsurfError, ValueError) as exc:
        print(f"quadsurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"quadsurf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

if __name__ == "__main__":
    sys.exit(main())
