"""File formats: flat binary fields with JSON sidecars, CSV tables, SVG contour plots.

Numbers written to JSON and CSV are rounded to 9 significant digits so that
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .fields import DomainMask, Grid, ScalarField
from .geometry import ConvexBody

SIG_DIGITS = 9
LOCK_NAME = ".quadsurf.lock"


class OutputLockedError(OSError):
    pass


def fmt(x) -> str:
    """Fixed 9-significant-digit text for a float; nan and inf spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{SIG_DIGITS}g}"
    return "0" if s == "-0" else s


def clean(obj):
    """Recursively round floats for JSON; nan becomes null and inf a string."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(fmt(x))
    return obj


def dump_json(path, obj):
    Path(path).write_text(json.dumps(clean(obj), indent=2, sort_keys=False) + "\n")


def grid_dict(grid: Grid):
    return {"origin": list(grid.origin), "h": grid.h, "nx": grid.nx, "ny": grid.ny}


def save_array(directory, name, values, grid: Grid, kind="field"):
    """Write ``name.bin`` (little-endian float64, row-major) and the ``name.json`` sidecar."""
    directory = Path(directory)
    arr = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    arr.tofile(directory / f"{name}.bin")
    meta = {"kind": kind, "file": f"{name}.bin", "dtype": "float64", "endianness": "little",
            "order": "row-major", "shape": list(arr.shape), "grid": grid_dict(grid)}
    Path(directory / f"{name}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return [f"{name}.bin", f"{name}.json"]


def load_array(directory, name):
    directory = Path(directory)
    meta = json.loads((directory / f"{name}.json").read_text())
    g = meta["grid"]
    grid = Grid(tuple(g["origin"]), g["h"], g["nx"], g["ny"])
    values = np.fromfile(directory / meta["file"], dtype="<f8").reshape(meta["shape"])
    return grid, values


def save_body(path, body: ConvexBody):
    Path(path).write_text(json.dumps(body.to_dict(), indent=2, default=_to_list) + "\n")


def load_body(path) -> ConvexBody:
    return ConvexBody.from_dict(json.loads(Path(path).read_text()))


def _to_list(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def save_run(directory, field: ScalarField, body: ConvexBody, kind, extra=None):
    """Field, mask and body plus a manifest listing them."""
    directory = Path(directory)
    files = save_array(directory, "field", field.values, field.grid, "field")
    files += save_array(directory, "mask", field.mask.phi, field.grid, "mask")
    save_body(directory / "body.json", body)
    files.append("body.json")
    manifest = {"kind": kind, "grid": grid_dict(field.grid), "files": files}
    if extra:
        manifest.update(extra)
    dump_json(directory / "manifest.json", manifest)
    return manifest


def load_run(directory):
    """(field with mask attached, body, manifest) from a directory written by ``save_run``."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    grid, values = load_array(directory, "field")
    mgrid, phi = load_array(directory, "mask")
    if mgrid != grid:
        raise ValueError("field and mask grids differ")
    mask = DomainMask(grid, phi)
    field = ScalarField(grid, values, mask)
    return field, load_body(directory / "body.json"), manifest


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "max_res", "mean_res", "mean_radius", "mean_velocity"])
        for r in history:
            w.writerow([r.iteration, fmt(r.max_res), fmt(r.mean_res), fmt(r.mean_radius), fmt(r.mean_velocity)])


def write_table_csv(path, table):
    """Thickness table rows (c_index, cx, cy, nux, nuy, t, d_t, flag); an empty flag is written as ok."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c_index", "cx", "cy", "nux", "nuy", "t", "d_t", "flag"])
        for ci, cx, cy, nx, ny, t, d, flag in table.rows():
            w.writerow([ci, fmt(cx), fmt(cy), fmt(nx), fmt(ny), fmt(t), fmt(d), flag or "ok"])


def write_contours_csv(path, contours):
    """One row per vertex: level, component_id, vertex_id, x, y."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "component_id", "vertex_id", "x", "y"])
        for c in contours:
            for k, poly in enumerate(c.polylines):
                for j, (x, y) in enumerate(poly):
                    w.writerow([fmt(c.level), k, j, fmt(x), fmt(y)])


def _path(poly, grid: Grid, scale):
    x0, _, _, y1 = grid.extent
    pts = [f"{(x - x0) * scale:.3f},{(y1 - y) * scale:.3f}" for x, y in poly]
    return "M" + " L".join(pts) + " Z"


def write_svg(path, grid: Grid, contours, reconstructions=None, body: ConvexBody = None, width=600):
    """Contour family (solid) with radial reconstructions (dashed), one path per level."""
    x0, x1, y0, y1 = grid.extent
    scale = width / (x1 - x0)
    height = (y1 - y0) * scale
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height:.1f}" '
           f'viewBox="0 0 {width} {height:.1f}">',
           '<rect width="100%" height="100%" fill="white"/>']
    if body is not None:
        if body.kind == "disk":
            cx, cy = (body.center[0] - x0) * scale, (y1 - body.center[1]) * scale
            out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{body.radius * scale:.3f}" '
                       'fill="#ddd" stroke="black" stroke-width="0.5"/>')
        else:
            out.append(f'<path d="{_path(body.vertices, grid, scale)}" fill="#ddd" stroke="black" stroke-width="0.5"/>')
    for c in contours:
        d = " ".join(_path(p, grid, scale) for p in c.polylines)
        if d:
            out.append(f'<path data-level="{fmt(c.level)}" class="contour" d="{d}" fill="none" '
                       'stroke="steelblue" stroke-width="1"/>')
    for level, pts in (reconstructions or []):
        if len(pts) >= 3:
            out.append(f'<path data-level="{fmt(level)}" class="reconstruction" d="{_path(pts, grid, scale)}" '
                       'fill="none" stroke="crimson" stroke-width="1" stroke-dasharray="4 3"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


@contextmanager
def output_lock(directory):
    """Exclusive lock file in an output directory for the duration of one command."""
    directory = Path(directory)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise OutputLockedError(f"{directory} is locked by another run ({lock})") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            lock.unlink()
        except FileNotFoundError:
            pass
