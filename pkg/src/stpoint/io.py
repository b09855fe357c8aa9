"""Readers and writers for the package's file formats.

Pattern CSV: header ``x,y,t[,mark1,...]``, one event per row, UTF-8,
'.' decimal separator.  Network JSON: ``{"vertices": [[x,y], ...],
"segments": [[u,v], ...]}`` with 0-based vertex indices.  Covariate
node/sample CSV: header ``x,y,t,value``; a complete regular grid in
x-fastest order round-trips back into a CovariateGrid.  Summary
surfaces serialize long-format as ``r,h,estimate,theoretical`` (an
``id`` column in front for per-event sets).  Intensity CSV: a single
``intensity`` column, row-aligned with the pattern file.

CSV floats are written with 17 significant digits and JSON floats with
the shortest exact repr, so every value round-trips bit-for-bit.
"""

from __future__ import annotations

import csv
import json
from typing import Optional

import numpy as np

from .core import PointPattern, SpatialWindow, TimeInterval, pattern_from_table
from .covariates import CovariateGrid
from .network import LinearNetwork
from .summaries import ListaSet, SummarySurface

__all__ = [
    "fmt_float",
    "json_dumps",
    "write_pattern_csv",
    "read_pattern_csv",
    "write_network_json",
    "read_network_json",
    "write_covariate_csv",
    "read_covariate_csv",
    "grid_from_nodes",
    "write_surface_csv",
    "read_surface_csv",
    "write_intensity_csv",
    "read_intensity_csv",
]


def fmt_float(v) -> str:
    return format(float(v), ".17g")


def json_dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, two-space indent."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# point patterns


def write_pattern_csv(pattern: PointPattern, path) -> None:
    cols = [pattern.x, pattern.y, pattern.t]
    header = ["x", "y", "t"]
    formats = [True, True, True]  # numeric column flags
    for name, mark in pattern.marks.items():
        header.append(name)
        if mark.kind == "continuous":
            cols.append(mark.values)
            formats.append(True)
        else:
            cols.append(mark.labels)
            formats.append(False)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(pattern.n):
            w.writerow(
                [fmt_float(c[i]) if f else str(c[i]) for c, f in zip(cols, formats)]
            )


def read_pattern_csv(
    path,
    window: Optional[SpatialWindow] = None,
    interval: Optional[TimeInterval] = None,
    network: Optional[LinearNetwork] = None,
    snap_max: Optional[float] = None,
) -> PointPattern:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if header[:3] != ["x", "y", "t"]:
        raise ValueError(f"{path}: header must start with x,y,t")
    return pattern_from_table(
        rows[1:],
        names=header[3:],
        window=window,
        interval=interval,
        network=network,
        snap_max=snap_max,
    )


# ---------------------------------------------------------------------------
# linear networks


def write_network_json(network: LinearNetwork, path) -> None:
    obj = {
        "vertices": [[float(x), float(y)] for x, y in network.vertices],
        "segments": [[int(u), int(v)] for u, v in network.segments],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json_dumps(obj))


def read_network_json(path) -> LinearNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "vertices" not in obj or "segments" not in obj:
        raise ValueError(f"{path}: expected keys 'vertices' and 'segments'")
    return LinearNetwork(
        np.asarray(obj["vertices"], dtype=float),
        np.asarray(obj["segments"], dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# covariates


def write_covariate_csv(grid: CovariateGrid, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "t", "value"])
        for row in grid.node_table():
            w.writerow([fmt_float(v) for v in row])


def read_covariate_csv(path) -> np.ndarray:
    """Rows of (x, y, t, value) from a sample or grid-node CSV."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if header != ["x", "y", "t", "value"]:
        raise ValueError(f"{path}: header must be x,y,t,value")
    try:
        out = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError:
        raise ValueError(f"{path}: non-numeric entry")
    if out.ndim != 2 or out.shape[1] != 4 or out.shape[0] == 0:
        raise ValueError(f"{path}: expected rows of x,y,t,value")
    return out


def _uniform_axis(vals: np.ndarray, what: str):
    if len(vals) < 2:
        raise ValueError(f"covariate grid needs at least 2 {what} nodes")
    steps = np.diff(vals)
    step = float(steps[0])
    if step <= 0 or np.max(np.abs(steps - step)) > 1e-9 * max(1.0, abs(step)):
        raise ValueError(f"covariate {what} nodes are not uniformly spaced")
    return float(vals[0]), step, len(vals)


def grid_from_nodes(samples: np.ndarray, name: str = "cov") -> CovariateGrid:
    """Rebuild a regular grid from node rows in x-fastest order.

    Raises if the rows do not enumerate a complete, uniformly spaced
    grid; scattered samples must go through interpolate_idw instead.
    """
    samples = np.asarray(samples, dtype=float)
    xs = np.unique(samples[:, 0])
    ys = np.unique(samples[:, 1])
    ts = np.unique(samples[:, 2])
    nx, ny, nt = len(xs), len(ys), len(ts)
    if nx * ny * nt != len(samples):
        raise ValueError("covariate rows do not form a complete regular grid")
    x0, dx, _ = _uniform_axis(xs, "x")
    y0, dy, _ = _uniform_axis(ys, "y")
    t0, dt, _ = _uniform_axis(ts, "t")
    tt, yy, xx = np.meshgrid(ts, ys, xs, indexing="ij")
    expect = np.column_stack([xx.ravel(), yy.ravel(), tt.ravel()])
    if not np.array_equal(expect, samples[:, :3]):
        raise ValueError("covariate rows are not in x-fastest grid order")
    values = samples[:, 3].reshape(nt, ny, nx)
    return CovariateGrid(name, x0, dx, nx, y0, dy, ny, t0, dt, nt, values)


# ---------------------------------------------------------------------------
# summary surfaces


def write_surface_csv(surface, path) -> None:
    """Long-format surface CSV; ListaSet gains a leading id column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(surface, ListaSet):
            w.writerow(["id", "r", "h", "estimate", "theoretical"])
            for pid, surf in zip(surface.ids, surface.surfaces):
                for i, r in enumerate(surf.rs):
                    for j, h in enumerate(surf.hs):
                        w.writerow(
                            [str(int(pid))]
                            + [fmt_float(v) for v in (r, h, surf.est[i, j], surf.theo[i, j])]
                        )
        else:
            w.writerow(["r", "h", "estimate", "theoretical"])
            for i, r in enumerate(surface.rs):
                for j, h in enumerate(surface.hs):
                    w.writerow(
                        [fmt_float(v) for v in (r, h, surface.est[i, j], surface.theo[i, j])]
                    )


def read_surface_csv(path, statistic: str = "K") -> SummarySurface:
    """Rebuild a single surface written by write_surface_csv."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["r", "h", "estimate", "theoretical"]:
        raise ValueError(f"{path}: expected header r,h,estimate,theoretical")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    rs = np.unique(data[:, 0])
    hs = np.unique(data[:, 1])
    if len(rs) * len(hs) != len(data):
        raise ValueError(f"{path}: rows do not cover a full lag grid")
    est = data[:, 2].reshape(len(rs), len(hs))
    theo = data[:, 3].reshape(len(rs), len(hs))
    return SummarySurface(rs, hs, est, theo, statistic)


# ---------------------------------------------------------------------------
# per-event intensities


def write_intensity_csv(values, path) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["intensity"])
        for v in values:
            w.writerow([fmt_float(v)])


def read_intensity_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    start = 1 if rows[0] and rows[0][0].strip() == "intensity" else 0
    try:
        vals = np.array([float(r[0]) for r in rows[start:]], dtype=float)
    except ValueError:
        raise ValueError(f"{path}: non-numeric intensity entry")
    if vals.size == 0:
        raise ValueError(f"{path}: no intensity values")
    if (vals <= 0).any() or not np.isfinite(vals).all():
        raise ValueError(f"{path}: intensities must be positive and finite")
    return vals
