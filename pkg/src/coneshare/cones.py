"""Closed convex cones and the projections the solvers rely on.

Supported cones: the zero cone {0}, the nonnegative orthant, the second-order
cone (vector part first, scalar last), and finite products of these.  For each
cone the polar projection is implemented directly from its own closed form, not
via the Moreau identity, so the identity can serve as an independent check.

Sign convention: the polar of K is ``{y : <y, x> <= 0 for all x in K}``; the
dual cone is its negation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .prox import project_ball

#: default tolerance for membership queries
MEMBERSHIP_TOL = 1e-9


class Cone:
    """Base class; concrete cones define projections onto K and its polar."""

    dim: int

    def _check(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {y.shape}")
        return y


@dataclass(frozen=True)
class Zero(Cone):
    """The singleton {0}; its polar is the whole space."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")

    def project(self, y):
        return np.zeros(self.dim)

    def project_polar(self, y):
        return self._check(y).copy()

    def distance(self, y):
        return float(np.linalg.norm(self._check(y)))

    def contains(self, y, tol):
        return bool(np.max(np.abs(self._check(y)), initial=0.0) <= tol)

    def polar_contains(self, y, tol):
        self._check(y)
        return True


@dataclass(frozen=True)
class NonnegOrthant(Cone):
    """Componentwise nonnegative vectors; polar is the nonpositive orthant."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")

    def project(self, y):
        return np.maximum(self._check(y), 0.0)

    def project_polar(self, y):
        return np.minimum(self._check(y), 0.0)

    def distance(self, y):
        return float(np.linalg.norm(np.minimum(self._check(y), 0.0)))

    def contains(self, y, tol):
        return bool(np.min(self._check(y), initial=0.0) >= -tol)

    def polar_contains(self, y, tol):
        return bool(np.max(self._check(y), initial=0.0) <= tol)


@dataclass(frozen=True)
class SecondOrder(Cone):
    """{(u, t) : ||u|| <= t} with the scalar component stored last.

    dim counts the full vector, so dim = 1 degenerates to the ray t >= 0.
    """

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")

    def _split(self, y):
        y = self._check(y)
        return y[:-1], float(y[-1])

    def project(self, y):
        u, t = self._split(y)
        nu = float(np.linalg.norm(u))
        if nu <= t:
            return np.asarray(y, dtype=float).copy()
        if nu <= -t:
            return np.zeros(self.dim)
        # boundary case: nu > |t| >= 0 forces nu > 0
        beta = 0.5 * (t + nu)
        out = np.empty(self.dim)
        out[:-1] = beta * (u / nu)
        out[-1] = beta
        return out

    def project_polar(self, y):
        # polar cone {(u, t) : ||u|| <= -t}, projected by the mirrored rule
        u, t = self._split(y)
        nu = float(np.linalg.norm(u))
        if nu <= -t:
            return np.asarray(y, dtype=float).copy()
        if nu <= t:
            return np.zeros(self.dim)
        beta = 0.5 * (nu - t)
        out = np.empty(self.dim)
        out[:-1] = beta * (u / nu)
        out[-1] = -beta
        return out

    def distance(self, y):
        u, t = self._split(y)
        nu = float(np.linalg.norm(u))
        if nu <= t:
            return 0.0
        if nu <= -t:
            return float(np.hypot(nu, t))
        return (nu - t) / np.sqrt(2.0)

    def contains(self, y, tol):
        u, t = self._split(y)
        return bool(t >= -tol and float(np.linalg.norm(u)) <= t + tol)

    def polar_contains(self, y, tol):
        u, t = self._split(y)
        return bool(t <= tol and float(np.linalg.norm(u)) <= -t + tol)


@dataclass(frozen=True)
class Product(Cone):
    """Cartesian product of cones, stacked in order."""

    parts: tuple[Cone, ...]
    dim: int = field(init=False)

    def __init__(self, parts: Sequence[Cone]):
        parts = tuple(parts)
        if not parts:
            raise ValueError("product cone needs at least one factor")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "dim", sum(p.dim for p in parts))

    def slices(self):
        start = 0
        for part in self.parts:
            yield part, slice(start, start + part.dim)
            start += part.dim

    def _map(self, y, method):
        y = self._check(y)
        out = np.empty(self.dim)
        for part, sl in self.slices():
            out[sl] = getattr(part, method)(y[sl])
        return out

    def project(self, y):
        return self._map(y, "project")

    def project_polar(self, y):
        return self._map(y, "project_polar")

    def distance(self, y):
        y = self._check(y)
        return float(
            np.sqrt(sum(part.distance(y[sl]) ** 2 for part, sl in self.slices()))
        )

    def contains(self, y, tol):
        y = self._check(y)
        return all(part.contains(y[sl], tol) for part, sl in self.slices())

    def polar_contains(self, y, tol):
        y = self._check(y)
        return all(part.polar_contains(y[sl], tol) for part, sl in self.slices())


def project_cone(cone: Cone, y):
    """Euclidean projection of ``y`` onto ``cone``."""
    return cone.project(y)


def project_polar(cone: Cone, y):
    """Euclidean projection of ``y`` onto the polar of ``cone``."""
    return cone.project_polar(y)


def dist_cone(cone: Cone, y):
    """Euclidean distance from ``y`` to ``cone`` (analytic, not via project)."""
    return cone.distance(y)


def in_cone(cone: Cone, y, tol: float = MEMBERSHIP_TOL):
    """Membership test with additive tolerance ``tol``."""
    return cone.contains(y, tol)


def in_polar(cone: Cone, y, tol: float = MEMBERSHIP_TOL):
    """Membership test for the polar cone."""
    return cone.polar_contains(y, tol)


def in_dual(cone: Cone, y, tol: float = MEMBERSHIP_TOL):
    """Membership test for the dual cone (negation of the polar)."""
    return cone.polar_contains(-np.asarray(y, dtype=float), tol)


def project_cone_ball(cone: Cone, radius: float, y):
    """Project onto (polar of ``cone``) intersected with the centred ball.

    This is the dual feasible set of the solvers.  For a cone C and a ball B
    centred at the origin, P_{C and B} = P_B composed with P_C, because the
    ball projection only rescales along the ray through P_C(y), which stays
    inside the cone.
    """
    return project_ball(radius, cone.project_polar(y))
