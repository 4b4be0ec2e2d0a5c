"""Proximal operators for the nonsmooth terms used by the solvers.

Every operator follows the same contract: ``apply(x, tau)`` evaluates
``prox_{tau * g}(x) = argmin_u g(u) + ||u - x||^2 / (2 tau)`` and ``value(x)``
evaluates ``g(x)`` itself (indicator terms report 0).  Operators are stateless,
so one instance can be shared across agents and iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def soft_threshold(x, tau):
    """Shrink ``x`` toward zero by ``tau``: prox of ``tau * ||.||_1``.

    Parameters
    ----------
    x : array_like
        Input point (any shape).
    tau : float
        Threshold, must be >= 0.

    Returns
    -------
    ndarray with the same shape as ``x``.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def project_ball(radius, y):
    """Project ``y`` onto the Euclidean ball of ``radius`` centred at 0."""
    if radius < 0:
        raise ValueError(f"ball radius must be nonnegative, got {radius}")
    y = np.asarray(y, dtype=float)
    nrm = float(np.linalg.norm(y))
    if nrm <= radius:
        return y.copy()
    return y * (radius / nrm)


def prox_indicator_point(x, value):
    """Prox of the indicator of the singleton ``{value}``: constant map."""
    x = np.asarray(x, dtype=float)
    return np.full_like(x, value) if x.ndim else np.asarray(float(value))


class ProxOperator:
    """Interface stub; concrete operators implement ``apply`` and ``value``."""

    def apply(self, x, tau):  # pragma: no cover - abstract
        raise NotImplementedError

    def value(self, x):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroFunction(ProxOperator):
    """g = 0; prox is the identity."""

    def apply(self, x, tau):
        return np.asarray(x, dtype=float).copy()

    def value(self, x):
        return 0.0


@dataclass(frozen=True)
class L1Norm(ProxOperator):
    """g(x) = weight * ||x||_1."""

    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"l1 weight must be nonnegative, got {self.weight}")

    def apply(self, x, tau):
        return soft_threshold(x, tau * self.weight)

    def value(self, x):
        return self.weight * float(np.sum(np.abs(x)))


@dataclass(frozen=True)
class PinnedValue(ProxOperator):
    """Indicator of the singleton {pin}; used for coordinates fixed by the model.

    ``value`` reports 0 regardless of the argument; feasibility of pinned
    coordinates is tracked by the constraint metrics, not the objective.
    """

    pin: float

    def apply(self, x, tau):
        return prox_indicator_point(x, self.pin)

    def value(self, x):
        return 0.0


@dataclass(frozen=True)
class BallIndicator(ProxOperator):
    """Indicator of the centred Euclidean ball; prox is the ball projection."""

    radius: float

    def apply(self, x, tau):
        return project_ball(self.radius, x)

    def value(self, x):
        return 0.0


class SeparableProx(ProxOperator):
    """Blockwise composition of operators acting on contiguous slices.

    Parameters
    ----------
    parts : sequence of (operator, size) pairs
        Applied in order to consecutive slices of the input vector.
    """

    def __init__(self, parts: Sequence[tuple[ProxOperator, int]]):
        self.parts = tuple((op, int(size)) for op, size in parts)
        if any(size <= 0 for _, size in self.parts):
            raise ValueError("every block must have positive size")
        self.dim = sum(size for _, size in self.parts)

    def _slices(self):
        start = 0
        for op, size in self.parts:
            yield op, slice(start, start + size)
            start += size

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {x.shape}")
        return x

    def apply(self, x, tau):
        x = self._check(x)
        out = np.empty_like(x)
        for op, sl in self._slices():
            out[sl] = op.apply(x[sl], tau)
        return out

    def value(self, x):
        x = self._check(x)
        return sum(op.value(x[sl]) for op, sl in self._slices())
