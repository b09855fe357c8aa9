"""Derivative-free minimisation by the simplex method.

Classic Nelder-Mead with reflection 1, expansion 2, contraction 0.5 and
shrink 0.5, plus optional box constraints handled by projecting candidate
points onto the box.  Convergence is declared when the simplex diameter
falls below a relative tolerance; an iteration cap returns the best point
found with ``converged=False``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = ["MinimizeResult", "nelder_mead"]

ALPHA = 1.0  # reflection
GAMMA = 2.0  # expansion
RHO = 0.5  # contraction
SIGMA = 0.5  # shrink


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    n_iter: int
    converged: bool


def _clip(x, lower, upper):
    if lower is None and upper is None:
        return x
    return np.clip(x, lower, upper)


def nelder_mead(
    fn: Callable[[np.ndarray], float],
    x0,
    step: float = 0.5,
    bounds: Optional[Tuple] = None,
    diam_tol: float = 1e-8,
    max_iter: int = 2000,
) -> MinimizeResult:
    """Minimise fn from x0; ``bounds`` is (lower, upper) arrays or None."""
    x0 = np.asarray(x0, dtype=float)
    ndim = len(x0)
    lower = upper = None
    if bounds is not None:
        lower = np.asarray(bounds[0], dtype=float)
        upper = np.asarray(bounds[1], dtype=float)
        x0 = _clip(x0, lower, upper)

    simplex = [x0]
    for k in range(ndim):
        p = x0.copy()
        p[k] += step
        simplex.append(_clip(p, lower, upper))
    simplex = np.array(simplex)
    values = np.array([fn(p) for p in simplex])

    n_iter = 0
    while n_iter < max_iter:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]

        spread = np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1))
        scale = max(1.0, float(np.linalg.norm(simplex[0])))
        if spread < diam_tol * scale:
            return MinimizeResult(simplex[0], float(values[0]), n_iter, True)

        n_iter += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = _clip(centroid + ALPHA * (centroid - worst), lower, upper)
        f_r = fn(reflected)
        if f_r < values[0]:
            expanded = _clip(centroid + GAMMA * (reflected - centroid), lower, upper)
            f_e = fn(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = _clip(centroid + RHO * (reflected - centroid), lower, upper)
            else:
                contracted = _clip(centroid + RHO * (worst - centroid), lower, upper)
            f_c = fn(contracted)
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                for k in range(1, ndim + 1):
                    simplex[k] = _clip(
                        simplex[0] + SIGMA * (simplex[k] - simplex[0]), lower, upper
                    )
                    values[k] = fn(simplex[k])

    order = np.argsort(values, kind="stable")
    return MinimizeResult(simplex[order[0]], float(values[order[0]]), n_iter, False)
