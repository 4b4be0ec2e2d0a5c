"""A computable bound on the norm of optimal dual multipliers.

Given a strictly feasible point with constraint vector ``gbar`` in the
interior of K, any optimal multiplier satisfies
``||y*|| <= (objective(gbar point) - lower bound on the optimum) / radius``
where the radius is how far ``gbar`` sits from the cone boundary, measured
against unit-l1 directions of the dual cone:

    interior_radius = min { w . gbar : ||w||_1 = 1, w in dual cone }.

The l1 normalisation makes the minimum computable exactly for every
supported cone while still lower-bounding the Euclidean version, so the
resulting dual bound stays valid.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .cones import Cone, NonnegOrthant, Product, SecondOrder, Zero


def interior_radius(cone: Cone, gbar) -> float:
    """Exact minimum of ``w . gbar`` over unit-l1 dual-cone directions.

    Requires ``gbar`` strictly inside the cone; raises ValueError otherwise
    (and for cones with empty interior, where no such certificate exists).

    Per cone type:
      orthant      min_j gbar_j
      second order the unique mu >= 0 with mu + || |g_vec| + mu ||_2 = g_last,
                   found by root bracketing (the left side is strictly
                   increasing, negative at 0 under strict interiority)
      product      the smallest factor radius (unit l1 mass concentrates on
                   the weakest factor)
    """
    gbar = np.asarray(gbar, dtype=float)
    if gbar.shape != (cone.dim,):
        raise ValueError(f"expected shape ({cone.dim},), got {gbar.shape}")
    if isinstance(cone, Zero):
        raise ValueError("the zero cone has empty interior; no certificate exists")
    if isinstance(cone, NonnegOrthant):
        radius = float(np.min(gbar))
        if radius <= 0:
            raise ValueError(
                "certificate point is not strictly interior (a coordinate is <= 0)"
            )
        return radius
    if isinstance(cone, SecondOrder):
        g_vec, g_last = np.abs(gbar[:-1]), float(gbar[-1])
        slack = g_last - float(np.linalg.norm(g_vec))
        if slack <= 0:
            raise ValueError(
                "certificate point is not strictly interior (||vector|| >= scalar)"
            )
        if g_vec.size == 0:
            return g_last

        def gap(mu):
            return mu + float(np.linalg.norm(g_vec + mu)) - g_last

        return float(brentq(gap, 0.0, g_last, xtol=1e-15, rtol=1e-14))
    if isinstance(cone, Product):
        return min(interior_radius(part, gbar[sl]) for part, sl in cone.slices())
    raise TypeError(f"unsupported cone type {type(cone).__name__}")


def dual_bound(cone: Cone, gbar, objective_value: float,
               lower_bound: float) -> float:
    """Bound on ||y*|| from a strictly feasible point.

    ``objective_value`` is the objective at the certificate point and
    ``lower_bound`` any valid lower bound on the optimal value (0 suffices
    for nonnegative objectives).
    """
    gap = float(objective_value) - float(lower_bound)
    if gap < 0:
        raise ValueError(
            "lower bound exceeds the certificate objective; the bound is invalid"
        )
    return gap / interior_radius(cone, gbar)
