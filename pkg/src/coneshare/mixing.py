"""Inexact distributed averaging: communication budgets and mixers.

A mixer approximates the projection onto the consensus set
``{(y_1, ..., y_N) : y_1 = ... = y_N, ||y_i|| <= radius}`` using only
neighbour exchanges.  Undirected rounds use Metropolis weights, directed
rounds use push-sum ratios; per-agent weights gamma_i generalise the average
to a weighted one.  All code paths track numerator blocks and scalar
denominators, which collapses to plain averaging in the symmetric unweighted
case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import MixingDecay, Schedule, weight_matrix, weight_product
from .prox import project_ball

_SNAP = 1e-9  # integer snap for ceilings that are exact integers in theory


def _int_ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class Budget:
    """Rounds-per-call rule q_k, k = 0, 1, 2, ...; always >= 1.

    kind:
      logarithmic  q_k = max(1, ceil(coefficient * ln(k + 1))); when built
                   from a decay estimate (alpha, c) the coefficient is
                   (3 + c) / ln(1/alpha)
      polynomial   q_k = max(1, ceil((k + 1)^(1/exponent)))
      constant     q_k = rounds
      explicit     q_k = values[k], repeating the last entry past the end
    """

    kind: str
    coefficient: float = 10.0
    alpha: float | None = None
    c: float | None = None
    exponent: float = 2.0
    rounds: int = 1
    values: tuple[int, ...] = ()

    def rounds_for(self, k: int) -> int:
        if k < 0:
            raise ValueError("call index must be >= 0")
        if self.kind == "logarithmic":
            return max(1, _int_ceil(self.coefficient * math.log(k + 1)))
        if self.kind == "polynomial":
            return max(1, _int_ceil((k + 1) ** (1.0 / self.exponent)))
        if self.kind == "constant":
            return self.rounds
        if self.kind == "explicit":
            return self.values[min(k, len(self.values) - 1)]
        raise ValueError(f"unknown budget kind {self.kind!r}")

    def total_rounds(self, n_calls: int) -> int:
        return sum(self.rounds_for(k) for k in range(n_calls))


def logarithmic_budget(alpha: float | None = None, c: float | None = None,
                       coefficient: float | None = None) -> Budget:
    """Logarithmic budget from either a decay pair (alpha, c) or a coefficient."""
    if coefficient is None:
        if alpha is None or c is None:
            raise ValueError("need either coefficient or both alpha and c")
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        coefficient = (3.0 + c) / math.log(1.0 / alpha)
    elif coefficient <= 0:
        raise ValueError(f"coefficient must be positive, got {coefficient}")
    return Budget("logarithmic", coefficient=float(coefficient),
                  alpha=alpha, c=c)


def polynomial_budget(exponent: float) -> Budget:
    if exponent < 1.0:
        raise ValueError(f"polynomial exponent must be >= 1, got {exponent}")
    return Budget("polynomial", exponent=float(exponent))


def constant_budget(rounds: int) -> Budget:
    if rounds < 1:
        raise ValueError(f"constant budget must be >= 1 round, got {rounds}")
    return Budget("constant", rounds=int(rounds))


def explicit_budget(values) -> Budget:
    vals = tuple(int(v) for v in values)
    if not vals or any(v < 1 for v in vals):
        raise ValueError("explicit budget needs a nonempty list of rounds >= 1")
    return Budget("explicit", values=vals)


def default_budget() -> Budget:
    """q_k = ceil(10 ln(k+1)), the rule used by the bundled experiments;
    equivalently logarithmic with alpha = exp(-0.4), c = 1."""
    return Budget("logarithmic", coefficient=10.0, alpha=math.exp(-0.4), c=1.0)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsensusGeometry:
    """Shape of the consensus set: N blocks of dimension m, ball radius, and
    optional positive averaging weights gamma_i."""

    n_agents: int
    block_dim: int
    radius: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.n_agents < 1 or self.block_dim < 1:
            raise ValueError("need n_agents >= 1 and block_dim >= 1")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.n_agents,) or np.any(w <= 0):
                raise ValueError("weights must be positive, one per agent")
            object.__setattr__(self, "weights", w)

    def _check_blocks(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_agents, self.block_dim):
            raise ValueError(
                f"expected blocks of shape {(self.n_agents, self.block_dim)}, "
                f"got {w.shape}"
            )
        return w


def exact_projection(geom: ConsensusGeometry, blocks):
    """Exact projection onto the consensus set: (weighted) average the blocks,
    clip the average to the ball, copy to every agent."""
    w = geom._check_blocks(blocks)
    if geom.weights is None or np.all(geom.weights == geom.weights[0]):
        # equal weights must reduce to the plain mean bit for bit
        avg = w.mean(axis=0)
    else:
        avg = geom.weights @ w / geom.weights.sum()
    avg = project_ball(geom.radius, avg)
    return np.tile(avg, (geom.n_agents, 1))


def _clip_rows(blocks, radius):
    nrm = np.linalg.norm(blocks, axis=1)
    scale = np.ones_like(nrm)
    over = nrm > radius
    scale[over] = radius / nrm[over]
    return blocks * scale[:, None]


def _propagate(schedule: Schedule, t0: int, q: int, blocks, weights):
    """Run q gossip rounds starting at round t0 on the given blocks.

    Returns the per-agent ratio estimates of the (weighted) average.  The
    denominator column is only materialised when the weights or the push-sum
    ratios require it.
    """
    need_ratio = schedule.directed or weights is not None
    state = blocks * weights[:, None] if weights is not None else blocks.copy()
    if need_ratio:
        den = weights.copy() if weights is not None else np.ones(state.shape[0])
        state = np.concatenate([state, den[:, None]], axis=1)
    for t in range(t0, t0 + q):
        state = weight_matrix(schedule.round(t)) @ state
    if need_ratio:
        return state[:, :-1] / state[:, -1:]
    return state


class Mixer:
    """Interface: ``mix(blocks)`` returns (mixed blocks, rounds consumed)."""

    geom: ConsensusGeometry

    def mix(self, blocks):  # pragma: no cover - abstract
        raise NotImplementedError


class ExactMixer(Mixer):
    """Zero-communication oracle computing the exact projection."""

    def __init__(self, geom: ConsensusGeometry):
        self.geom = geom

    def mix(self, blocks):
        return exact_projection(self.geom, blocks), 0


class GossipMixer(Mixer):
    """Budgeted gossip approximation of the consensus projection.

    Consumes schedule rounds sequentially: the k-th call (k = 0, 1, ...) uses
    rounds t_k .. t_k + q_k - 1 where q_k comes from the budget.  After the
    rounds, every block is clipped to the ball.
    """

    def __init__(self, schedule: Schedule, budget: Budget,
                 geom: ConsensusGeometry):
        if schedule.n_nodes != geom.n_agents:
            raise ValueError("schedule and geometry disagree on agent count")
        self.schedule = schedule
        self.budget = budget
        self.geom = geom
        self.calls = 0
        self.cursor = 0

    def mix(self, blocks):
        w = self.geom._check_blocks(blocks)
        q = self.budget.rounds_for(self.calls)
        mixed = _propagate(self.schedule, self.cursor, q, w, self.geom.weights)
        self.calls += 1
        self.cursor += q
        return _clip_rows(mixed, self.geom.radius), q


def reference_mix(schedule: Schedule, t0: int, q: int,
                  geom: ConsensusGeometry, blocks):
    """Dense-matrix reference for one mixing call (test path).

    Builds the full round product and applies it in one shot; must agree with
    the sequential gossip path to float accuracy.
    """
    w = geom._check_blocks(blocks)
    prod = weight_product(schedule, t0 - 1, t0 + q - 1)
    if geom.weights is None:
        num = prod @ w
        den = prod @ np.ones(geom.n_agents)
    else:
        num = prod @ (w * geom.weights[:, None])
        den = prod @ geom.weights
    if schedule.directed or geom.weights is not None:
        num = num / den[:, None]
    return _clip_rows(num, geom.radius)


def averaging_errors(schedule: Schedule, t0: int, n_rounds: int, blocks,
                     weights=None):
    """Worst-block relative error of the gossip average after 1..n_rounds.

    Returns an array e[t-1] = max_i ||theta_i^t - avg|| / max_i ||w_i|| where
    avg is the exact (weighted) average of the input blocks.  Used to measure
    decay rates empirically.
    """
    w = np.asarray(blocks, dtype=float)
    if weights is None:
        avg = w.mean(axis=0)
    else:
        weights = np.asarray(weights, dtype=float)
        avg = weights @ w / weights.sum()
    scale = float(np.max(np.linalg.norm(w, axis=1)))
    if scale == 0.0:
        scale = 1.0
    need_ratio = schedule.directed or weights is not None
    state = w * weights[:, None] if weights is not None else w.copy()
    if need_ratio:
        den = weights.copy() if weights is not None else np.ones(state.shape[0])
        state = np.concatenate([state, den[:, None]], axis=1)
    errs = np.empty(n_rounds)
    for j, t in enumerate(range(t0, t0 + n_rounds)):
        state = weight_matrix(schedule.round(t)) @ state
        theta = state[:, :-1] / state[:, -1:] if need_ratio else state
        errs[j] = float(np.max(np.linalg.norm(theta - avg, axis=1))) / scale
    return errs


def estimate_decay(schedule: Schedule, n_rounds: int = 80, n_probes: int = 3,
                   seed: int = 0) -> MixingDecay:
    """Fit a geometric decay model to measured averaging errors.

    Least-squares fit of log error against round count over a few random
    probe vectors; errors below float noise are dropped from the fit.
    """
    rng = np.random.default_rng(seed)
    n = schedule.n_nodes
    worst = np.zeros(n_rounds)
    for _ in range(n_probes):
        w = rng.standard_normal((n, 1))
        worst = np.maximum(worst, averaging_errors(schedule, 0, n_rounds, w))
    t = np.arange(1, n_rounds + 1, dtype=float)
    keep = worst > 1e-14
    if keep.sum() < 2:
        raise ValueError("errors decayed below float noise; reduce n_rounds")
    slope, intercept = np.polyfit(t[keep], np.log(worst[keep]), 1)
    if slope >= -1e-12:  # constant errors can fit to a noise-level slope
        raise ValueError("measured averaging error is not decaying")
    return MixingDecay(gamma_factor=float(np.exp(intercept)),
                       log_alpha=float(slope))
