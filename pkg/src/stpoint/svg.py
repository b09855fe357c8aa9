"""Minimal deterministic SVG plots: rect-grid heatmaps and point plots.

No plotting dependency: a fixed 16-stop palette table is embedded and
every coordinate is formatted with two decimals, so identical inputs
produce identical bytes.
"""

from __future__ import annotations

import numpy as np

from .core import PointPattern
from .covariates import CovariateGrid
from .summaries import SummarySurface

__all__ = ["PALETTE", "heatmap_svg", "surface_svg", "covariate_svg", "pattern_svg"]

# dark-purple to yellow, 16 stops
PALETTE = (
    (68, 1, 84),
    (72, 26, 108),
    (71, 47, 125),
    (65, 68, 135),
    (57, 86, 140),
    (49, 104, 142),
    (42, 120, 142),
    (35, 136, 142),
    (31, 152, 139),
    (34, 168, 132),
    (53, 183, 121),
    (84, 197, 104),
    (122, 209, 81),
    (165, 219, 54),
    (210, 226, 27),
    (253, 231, 37),
)


def _color(u: float) -> str:
    u = min(max(float(u), 0.0), 1.0)
    pos = u * (len(PALETTE) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(PALETTE) - 1)
    f = pos - lo
    rgb = tuple(
        int(round(PALETTE[lo][c] + f * (PALETTE[hi][c] - PALETTE[lo][c])))
        for c in range(3)
    )
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _num(v: float) -> str:
    return f"{v:.2f}"


def _header(width: float, height: float) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" '
        f'height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}">\n'
    )


def heatmap_svg(values, title: str = "", cell: float = 24.0) -> str:
    """Heatmap of a 2-d array; row 0 is drawn at the bottom."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2 or vals.size == 0:
        raise ValueError("heatmap needs a non-empty 2-d array")
    nrow, ncol = vals.shape
    margin, top = 10.0, 30.0
    width = margin * 2 + ncol * cell
    height = top + margin + nrow * cell
    vmin, vmax = float(np.nanmin(vals)), float(np.nanmax(vals))
    span = vmax - vmin
    parts = [_header(width, height)]
    if title:
        parts.append(
            f'<text x="{_num(margin)}" y="20" font-family="monospace" '
            f'font-size="12">{title} [{vmin:.6g}, {vmax:.6g}]</text>\n'
        )
    for i in range(nrow):
        for j in range(ncol):
            v = vals[i, j]
            u = 0.5 if span == 0 or not np.isfinite(v) else (v - vmin) / span
            x = margin + j * cell
            y = top + (nrow - 1 - i) * cell
            parts.append(
                f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cell)}" '
                f'height="{_num(cell)}" fill="{_color(u)}"/>\n'
            )
    parts.append("</svg>\n")
    return "".join(parts)


def surface_svg(surface: SummarySurface, which: str = "estimate") -> str:
    """Surface heatmap with r on the horizontal axis, h on the vertical."""
    vals = surface.est if which == "estimate" else surface.theo
    title = f"{surface.statistic} {which}"
    # transpose so rows follow h and columns follow r
    return heatmap_svg(vals.T, title=title)


def covariate_svg(grid: CovariateGrid, t_index: int = 0) -> str:
    if not 0 <= t_index < grid.nt:
        raise ValueError("t_index out of range")
    return heatmap_svg(grid.values[t_index], title=f"{grid.name} t={t_index}")


def pattern_svg(pattern: PointPattern, size: float = 480.0) -> str:
    """Events colored by time; the network is drawn when present."""
    w = pattern.window
    margin = 12.0
    scale = (size - 2 * margin) / max(w.width, w.height)

    def sx(x):
        return margin + (x - w.x0) * scale

    def sy(y):
        return size - margin - (y - w.y0) * scale

    parts = [_header(size, size)]
    parts.append(
        f'<rect x="{_num(sx(w.x0))}" y="{_num(sy(w.y1))}" '
        f'width="{_num(w.width * scale)}" height="{_num(w.height * scale)}" '
        'fill="none" stroke="#888888" stroke-width="1"/>\n'
    )
    if pattern.network is not None:
        net = pattern.network
        for u, v in net.segments:
            x1, y1 = net.vertices[u]
            x2, y2 = net.vertices[v]
            parts.append(
                f'<line x1="{_num(sx(x1))}" y1="{_num(sy(y1))}" '
                f'x2="{_num(sx(x2))}" y2="{_num(sy(y2))}" '
                'stroke="#444444" stroke-width="1"/>\n'
            )
    tspan = pattern.interval.length
    for i in range(pattern.n):
        u = (pattern.t[i] - pattern.interval.t0) / tspan if tspan > 0 else 0.5
        parts.append(
            f'<circle cx="{_num(sx(pattern.x[i]))}" cy="{_num(sy(pattern.y[i]))}" '
            f'r="2.50" fill="{_color(u)}"/>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)
