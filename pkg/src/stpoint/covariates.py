"""Spatio-temporal covariate grids.

Covariates are scattered samples (x, y, t, value) interpolated once onto a
regular 3-d grid by inverse-distance weighting (Shepard), then consumed
everywhere else by nearest-node lookup.  Samples are canonicalised into
lexicographic order before any summation so the interpolation is bit-exact
under permutation of the input rows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import SpatialWindow, TimeInterval

__all__ = ["CovariateGrid", "interpolate_idw", "lookup_nearest"]

SITE_TOL = 1e-12
_CHUNK = 65536


@dataclass(frozen=True)
class CovariateGrid:
    """Regular grid over window x interval, values laid out x-fastest."""

    name: str
    x0: float
    dx: float
    nx: int
    y0: float
    dy: float
    ny: int
    t0: float
    dt: float
    nt: int
    values: np.ndarray  # shape (nt, ny, nx)

    def __post_init__(self):
        if min(self.nx, self.ny, self.nt) < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        if min(self.dx, self.dy, self.dt) <= 0:
            raise ValueError("grid steps must be positive")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.nt, self.ny, self.nx):
            raise ValueError("values must have shape (nt, ny, nx)")
        if not np.isfinite(v).all():
            raise ValueError("grid values must be finite")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def ts(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def node_table(self) -> np.ndarray:
        """All nodes as rows (x, y, t, value), x-fastest."""
        tt, yy, xx = np.meshgrid(self.ts, self.ys, self.xs, indexing="ij")
        return np.column_stack(
            [xx.ravel(), yy.ravel(), tt.ravel(), self.values.ravel()]
        )


def _canonical_samples(samples) -> Tuple[np.ndarray, np.ndarray]:
    """Sort samples lexicographically and average exact duplicate sites."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError("samples must be rows of (x, y, t, value)")
    if len(arr) == 0:
        raise ValueError("no samples")
    if not np.isfinite(arr).all():
        raise ValueError("samples must be finite")
    order = np.lexsort((arr[:, 3], arr[:, 2], arr[:, 1], arr[:, 0]))
    arr = arr[order]
    sites = arr[:, :3]
    new_group = np.ones(len(arr), dtype=bool)
    new_group[1:] = (sites[1:] != sites[:-1]).any(axis=1)
    gid = np.cumsum(new_group) - 1
    ngroups = gid[-1] + 1
    if ngroups != len(arr):
        counts = np.bincount(gid)
        sums = np.zeros(ngroups)
        np.add.at(sums, gid, arr[:, 3])
        means = sums / counts
        spread = np.full(ngroups, -np.inf)
        np.maximum.at(spread, gid, arr[:, 3])
        lo = np.full(ngroups, np.inf)
        np.minimum.at(lo, gid, arr[:, 3])
        conflicting = int(np.sum((counts > 1) & (spread > lo)))
        if conflicting:
            warnings.warn(
                f"{conflicting} duplicate sample site(s) with conflicting "
                "values; using the mean",
                stacklevel=3,
            )
        first = np.flatnonzero(new_group)
        return sites[first], means
    return sites, arr[:, 3]


def interpolate_idw(
    samples,
    grid: Optional[Tuple[int, int, int]] = None,
    mult: float = 20.0,
    power: float = 2.0,
    window: Optional[SpatialWindow] = None,
    interval: Optional[TimeInterval] = None,
    name: str = "cov",
) -> CovariateGrid:
    """Shepard interpolation of scattered samples onto a regular grid.

    Node weights are dist**(-power) over all samples, summed in canonical
    (sorted) sample order.  A node within 1e-12 of a sample site takes that
    sample's value exactly.  Grid size is ``grid`` = (nx, ny, nt) when
    given, otherwise ceil(mult * J**(1/3)) nodes per axis for J samples.
    The grid spans the window and interval exactly (sample ranges unless
    supplied).
    """
    if power <= 0:
        raise ValueError("power must be positive")
    sites, vals = _canonical_samples(samples)
    nsamp = len(sites)
    if grid is None:
        side = max(2, math.ceil(mult * nsamp ** (1.0 / 3.0)))
        nx = ny = nt = side
    else:
        nx, ny, nt = (int(g) for g in grid)
        if min(nx, ny, nt) < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
    if window is None:
        window = SpatialWindow(
            float(sites[:, 0].min()),
            float(sites[:, 0].max()),
            float(sites[:, 1].min()),
            float(sites[:, 1].max()),
        )
    if interval is None:
        interval = TimeInterval(float(sites[:, 2].min()), float(sites[:, 2].max()))

    xs = np.linspace(window.x0, window.x1, nx)
    ys = np.linspace(window.y0, window.y1, ny)
    ts = np.linspace(interval.t0, interval.t1, nt)
    tt, yy, xx = np.meshgrid(ts, ys, xs, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel(), tt.ravel()])

    out = np.empty(len(nodes))
    for lo in range(0, len(nodes), _CHUNK):
        chunk = nodes[lo : lo + _CHUNK]
        diff = chunk[:, None, :] - sites[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        hit = d2 < SITE_TOL * SITE_TOL
        # inf weights at exact hits are overwritten below; 0 * inf is fine
        with np.errstate(divide="ignore", invalid="ignore"):
            w = d2 ** (-power / 2.0)
            # plain axis sums keep a fixed reduction order (no BLAS)
            num = np.sum(w * vals[None, :], axis=1)
            den = np.sum(w, axis=1)
            block = num / den
        any_hit = hit.any(axis=1)
        if any_hit.any():
            first = np.argmax(hit[any_hit], axis=1)
            block[any_hit] = vals[first]
        out[lo : lo + _CHUNK] = block

    dx = (window.x1 - window.x0) / (nx - 1)
    dy = (window.y1 - window.y0) / (ny - 1)
    dt = (interval.t1 - interval.t0) / (nt - 1)
    return CovariateGrid(
        name, window.x0, dx, nx, window.y0, dy, ny, interval.t0, dt, nt,
        out.reshape(nt, ny, nx),
    )


def lookup_nearest(grid: CovariateGrid, x, y, t) -> np.ndarray:
    """Value at the nearest grid node in index-scaled coordinates.

    Queries outside the grid clamp to the boundary; exact half-way ties
    round toward the lower index.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)

    def nearest(u, origin, step, n):
        frac = (u - origin) / step
        idx = np.ceil(frac - 0.5).astype(np.int64)  # half rounds down
        return np.clip(idx, 0, n - 1)

    i = nearest(x, grid.x0, grid.dx, grid.nx)
    j = nearest(y, grid.y0, grid.dy, grid.ny)
    k = nearest(t, grid.t0, grid.dt, grid.nt)
    return grid.values[k, j, i]
