"""Primal-dual solvers for conically coupled resource sharing.

The problem: N agents each hold a private composite objective
``f_i(xi_i) + rho_i(xi_i)`` (smooth + prox-friendly) and a coupling block
``R_i xi_i - r_i``; jointly they must keep the sum of the blocks inside a
closed convex cone K while minimising the total objective.

Three solvers share this module:

* ``dpda_s_run``: decentralised primal-dual iterations over a static
  undirected network, exchanging the running dual state with neighbours once
  per iteration.
* ``dpda_d_run``: the time-varying variant; dual consensus is maintained
  through a budgeted mixer (gossip or push-sum), and the multipliers live in
  the polar cone intersected with a norm ball.
* ``centralized_pda_run``: the single-machine primal-dual reference.

Step-size certificates (scalar per-agent margins and the equivalent
saddle-point matrix) live here too, as do the ergodic gap bounds the
convergence tests check against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cones import Cone, dist_cone, project_cone_ball, project_polar
from .graphs import Graph, adjacency_matrix, degrees
from .metrics import ErgodicAverage, MetricContext, MetricRow, consensus_gap, \
    edge_disagreement_norm
from .mixing import Budget, ConsensusGeometry, ExactMixer, Mixer, \
    exact_projection
from .prox import ProxOperator, ZeroFunction


class StepSizeError(ValueError):
    """Raised when step sizes fail their certificate."""


class NumericalError(RuntimeError):
    """Raised when solver state stops being finite."""


# ---------------------------------------------------------------------------
# problem data

def _zero_grad_factory(dim):
    zero = np.zeros(dim)

    def grad(_xi):
        return zero

    return grad


@dataclass
class AgentData:
    """One agent's private data.

    R : (m, n_i) coupling matrix
    r : (m,) coupling shift; the network-wide constraint is
        sum_i (R_i xi_i - r_i) in K
    grad_f / f_value : smooth part oracle (grad_f must be L-Lipschitz)
    lipschitz : L_i, the gradient Lipschitz constant (0 for a zero smooth part)
    prox : prox-friendly part rho_i
    """

    R: np.ndarray
    r: np.ndarray
    grad_f: Callable[[np.ndarray], np.ndarray] | None = None
    f_value: Callable[[np.ndarray], float] | None = None
    lipschitz: float = 0.0
    prox: ProxOperator = field(default_factory=ZeroFunction)

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.R.ndim != 2:
            raise ValueError("R must be a matrix")
        if self.r.shape != (self.R.shape[0],):
            raise ValueError("r must match the row dimension of R")
        if self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be >= 0")
        if self.grad_f is None:
            self.grad_f = _zero_grad_factory(self.R.shape[1])
        if self.f_value is None:
            self.f_value = lambda _xi: 0.0

    @property
    def dim(self):
        return self.R.shape[1]

    @property
    def norm_R(self):
        nrm = getattr(self, "_norm_R", None)
        if nrm is None:
            nrm = float(np.linalg.norm(self.R, 2))
            self._norm_R = nrm
        return nrm


@dataclass
class SharingProblem:
    """The coupled problem: agents plus the coupling cone K in R^m."""

    agents: list[AgentData]
    cone: Cone

    def __post_init__(self):
        if not self.agents:
            raise ValueError("need at least one agent")
        m = self.agents[0].R.shape[0]
        if any(a.R.shape[0] != m for a in self.agents):
            raise ValueError("all agents must share the coupling dimension")
        if self.cone.dim != m:
            raise ValueError(
                f"cone dimension {self.cone.dim} != coupling dimension {m}"
            )

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def m(self):
        return self.agents[0].R.shape[0]

    @property
    def dims(self):
        return [a.dim for a in self.agents]

    @property
    def r_total(self):
        return sum(a.r for a in self.agents)

    def coupling(self, xi):
        """sum_i (R_i xi_i - r_i), the vector whose cone membership is the
        constraint."""
        g = -self.r_total
        for a, x in zip(self.agents, xi):
            g = g + a.R @ x
        return g

    def objective(self, xi):
        return float(
            sum(a.f_value(x) + a.prox.value(x) for a, x in zip(self.agents, xi))
        )

    def check_iterate(self, xi):
        if len(xi) != self.n_agents:
            raise ValueError("one iterate block per agent required")
        out = []
        for a, x in zip(self.agents, xi):
            x = np.asarray(x, dtype=float)
            if x.shape != (a.dim,):
                raise ValueError(
                    f"iterate block of shape {x.shape} does not match agent "
                    f"dimension {a.dim}"
                )
            out.append(x.copy())
        return out


# ---------------------------------------------------------------------------
# step sizes and certificates

@dataclass(frozen=True)
class StepSizes:
    """Per-agent primal steps tau_i, dual steps kappa_i, and the consensus
    penalty gamma (a scalar, or one positive value per agent)."""

    tau: np.ndarray
    kappa: np.ndarray
    gamma: float | np.ndarray = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tau", np.atleast_1d(np.asarray(self.tau, float)))
        object.__setattr__(self, "kappa", np.atleast_1d(np.asarray(self.kappa, float)))
        if self.tau.shape != self.kappa.shape:
            raise ValueError("tau and kappa must have one entry per agent")
        if np.any(self.tau <= 0) or np.any(self.kappa <= 0):
            raise StepSizeError("step sizes must be positive")
        g = self.gamma
        if np.ndim(g) == 0:
            if g <= 0:
                raise StepSizeError("gamma must be positive")
        else:
            g = np.asarray(g, dtype=float)
            if g.shape != self.tau.shape or np.any(g <= 0):
                raise StepSizeError("per-agent gamma must be positive, one per agent")
            object.__setattr__(self, "gamma", g)

    def gamma_vector(self, n_agents):
        if np.ndim(self.gamma) == 0:
            return np.full(n_agents, float(self.gamma))
        return np.asarray(self.gamma, dtype=float)

    def gamma_scalar(self):
        if np.ndim(self.gamma) != 0:
            raise StepSizeError("this mode requires a single scalar gamma")
        return float(self.gamma)


@dataclass(frozen=True)
class StepSizeReport:
    ok: bool
    mode: str
    margins: np.ndarray
    failures: tuple[str, ...]
    min_eig: float | None = None

    def raise_if_failed(self):
        if not self.ok:
            raise StepSizeError("; ".join(self.failures))


def validate_step_sizes(problem: SharingProblem, steps: StepSizes, *,
                        graph: Graph | None = None, dynamic: bool = False,
                        strict: bool | None = None, tol: float = 1e-9,
                        assemble: bool = False) -> StepSizeReport:
    """Check the per-agent step-size certificate.

    Static mode (``dynamic=False``) needs the communication graph and a scalar
    gamma; the margin per agent is
    ``(1/tau_i - L_i)(1/kappa_i - 2 gamma d_i) - ||R_i||^2`` and zero margins
    are accepted (the certificate is an inequality).  Dynamic mode uses
    ``(1/tau_i - L_i)(1/kappa_i - gamma_i) - ||R_i||^2`` and is strict by
    default; ``strict=False`` tolerates margins down to ``-tol``.

    With ``assemble=True`` the saddle-point matrix is built and its smallest
    eigenvalue reported; positivity of that matrix is exactly equivalent to
    all scalar margins being positive (given the positivity prerequisites).
    """
    n = problem.n_agents
    if steps.tau.shape != (n,):
        raise ValueError("need one tau/kappa per agent")
    if strict is None:
        strict = dynamic
    failures = []
    margins = np.empty(n)
    if dynamic:
        gvec = steps.gamma_vector(n)
        for i, a in enumerate(problem.agents):
            inv_tau_gap = 1.0 / steps.tau[i] - a.lipschitz
            inv_kap_gap = 1.0 / steps.kappa[i] - gvec[i]
            margins[i] = inv_tau_gap * inv_kap_gap - a.norm_R**2
            if inv_tau_gap <= 0:
                failures.append(f"agent {i + 1}: tau must satisfy tau < 1/L")
            if inv_kap_gap <= 0:
                failures.append(f"agent {i + 1}: kappa must satisfy kappa < 1/gamma")
        mode = "dynamic"
    else:
        if graph is None:
            raise ValueError("static validation needs the communication graph")
        if graph.directed:
            raise ValueError("static mode runs on undirected graphs")
        gamma = steps.gamma_scalar()
        d = degrees(graph)
        for i, a in enumerate(problem.agents):
            inv_tau_gap = 1.0 / steps.tau[i] - a.lipschitz
            inv_kap_gap = 1.0 / steps.kappa[i] - 2.0 * gamma * d[i]
            margins[i] = inv_tau_gap * inv_kap_gap - a.norm_R**2
            if inv_tau_gap <= 0:
                failures.append(f"agent {i + 1}: tau must satisfy tau < 1/L")
            if inv_kap_gap <= 0:
                failures.append(
                    f"agent {i + 1}: kappa must satisfy kappa < 1/(2 gamma d_i)"
                )
        mode = "static"
    bad = margins <= 0 if strict else margins < -tol
    for i in np.nonzero(bad)[0]:
        op = ">" if strict else ">="
        failures.append(
            f"agent {i + 1}: certificate margin {margins[i]:.3e} must be {op} 0"
        )
    min_eig = None
    if assemble:
        qbar = assemble_step_matrix(problem, steps)
        min_eig = float(np.linalg.eigvalsh(qbar)[0])
    return StepSizeReport(ok=not failures, mode=mode, margins=margins,
                          failures=tuple(failures), min_eig=min_eig)


def assemble_step_matrix(problem: SharingProblem, steps: StepSizes):
    """Dense saddle-point step matrix [[D, -T'], [-T, D_kappa]].

    D stacks the primal blocks (1/tau_i - L_i) I and the consensus blocks
    (1/gamma_i) I; T couples them as [blkdiag(R_i), -I].  The matrix is
    positive definite exactly when the dynamic scalar margins all are.
    """
    n = problem.n_agents
    m = problem.m
    dims = problem.dims
    n_x = sum(dims)
    n0 = n * m
    gvec = steps.gamma_vector(n)
    size = n_x + 2 * n0
    q = np.zeros((size, size))
    # primal diagonal
    pos = 0
    for i, a in enumerate(problem.agents):
        val = 1.0 / steps.tau[i] - a.lipschitz
        q[pos:pos + dims[i], pos:pos + dims[i]] = val * np.eye(dims[i])
        pos += dims[i]
    for i in range(n):
        sl = slice(n_x + i * m, n_x + (i + 1) * m)
        q[sl, sl] = (1.0 / gvec[i]) * np.eye(m)
    for i in range(n):
        sl = slice(n_x + n0 + i * m, n_x + n0 + (i + 1) * m)
        q[sl, sl] = (1.0 / steps.kappa[i]) * np.eye(m)
    # coupling T = [blkdiag(R_i), -I], entering as -T and -T'
    pos = 0
    for i, a in enumerate(problem.agents):
        rows = slice(n_x + n0 + i * m, n_x + n0 + (i + 1) * m)
        cols = slice(pos, pos + dims[i])
        q[rows, cols] = -a.R
        q[cols, rows] = -a.R.T
        vcols = slice(n_x + i * m, n_x + (i + 1) * m)
        q[rows, vcols] = np.eye(m)
        q[vcols, rows] = np.eye(m)
        pos += dims[i]
    return q


def default_static_steps(problem: SharingProblem, graph: Graph,
                         gamma: float | None = None) -> StepSizes:
    """Step sizes meeting the static certificate with equality.

    gamma defaults to 2 N / n_edges; then tau_i = 1/||R_i|| and
    kappa_i = 1/(2 gamma d_i + ||R_i||).
    """
    if gamma is None:
        if graph.n_edges == 0:
            raise ValueError("default gamma needs a graph with edges")
        gamma = 2.0 * graph.n_nodes / graph.n_edges
    d = degrees(graph)
    norms = np.array([a.norm_R for a in problem.agents])
    if np.any(norms == 0):
        raise ValueError("default steps need nonzero coupling matrices")
    tau = 1.0 / norms
    kappa = 1.0 / (2.0 * gamma * d + norms)
    return StepSizes(tau=tau, kappa=kappa, gamma=float(gamma))


def default_dynamic_steps(problem: SharingProblem,
                          gamma: float | np.ndarray = 1.0,
                          safety: float = 0.9) -> StepSizes:
    """Step sizes for the time-varying solver.

    tau_i = 1/(N ||R_i||) and kappa_i = safety / (gamma_i + ||R_i|| / N).
    At safety = 1 the certificate holds with equality only, so the default
    backs off by 10% to keep the strict check satisfied.
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError(f"safety factor must be in (0, 1], got {safety}")
    n = problem.n_agents
    norms = np.array([a.norm_R for a in problem.agents])
    if np.any(norms == 0):
        raise ValueError("default steps need nonzero coupling matrices")
    gvec = np.full(n, float(gamma)) if np.ndim(gamma) == 0 else \
        np.asarray(gamma, dtype=float)
    tau = 1.0 / (n * norms)
    kappa = safety / (gvec + norms / n)
    return StepSizes(tau=tau, kappa=kappa,
                     gamma=float(gamma) if np.ndim(gamma) == 0 else gvec)


def curvature_steps(problem: SharingProblem, gamma: float | np.ndarray = 1.0,
                    c: float = 1.0, safety: float = 0.9) -> StepSizes:
    """Curvature-matched recipe tau_i = 1/(c + L_i),
    kappa_i = safety * c / (gamma_i + ||R_i||^2).

    Only valid for c in (0, 1]: larger c makes the product margin fall below
    the required operator norm.
    """
    if not 0.0 < c <= 1.0:
        raise ValueError(f"curvature parameter must be in (0, 1], got {c}")
    if not 0.0 < safety <= 1.0:
        raise ValueError(f"safety factor must be in (0, 1], got {safety}")
    n = problem.n_agents
    gvec = np.full(n, float(gamma)) if np.ndim(gamma) == 0 else \
        np.asarray(gamma, dtype=float)
    tau = np.array([1.0 / (c + a.lipschitz) for a in problem.agents])
    kappa = np.array([
        safety * c / (gvec[i] + a.norm_R**2)
        for i, a in enumerate(problem.agents)
    ])
    return StepSizes(tau=tau, kappa=kappa,
                     gamma=float(gamma) if np.ndim(gamma) == 0 else gvec)


# ---------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class Snapshot:
    """Ergodic averages captured at iteration k."""

    k: int
    comms: int
    xi_bar: list
    y_bar: np.ndarray


@dataclass
class RunTrace:
    algorithm: str
    n_iters: int
    rows: list
    snapshots: list
    xi: list
    y: np.ndarray
    comms: int
    extras: dict = field(default_factory=dict)

    @property
    def final_snapshot(self) -> Snapshot:
        return self.snapshots[-1]


def _record_set(n_iters, record):
    if record is None:
        record = 1 if n_iters <= 2000 else 10
    if isinstance(record, int):
        ks = set(range(record, n_iters + 1, record))
    else:
        ks = {int(k) for k in record}
    ks.add(n_iters)
    return ks


def _check_finite(k, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite solver state at iteration {k}")


# ---------------------------------------------------------------------------
# solvers

def dpda_s_run(problem: SharingProblem, graph: Graph, steps: StepSizes,
               n_iters: int, xi0, *, context: MetricContext | None = None,
               record=None, check_every: int = 100) -> RunTrace:
    """Distributed primal-dual iterations over a static undirected network.

    Each iteration: a primal prox step against the local multiplier, one
    neighbour exchange of the running dual state s, a polar-cone dual ascent
    step corrected by the network disagreement, and the s recursion
    ``s <- s + 2 y_new - y``.
    """
    if graph.directed:
        raise ValueError("this solver requires an undirected network")
    if graph.n_nodes != problem.n_agents:
        raise ValueError("network size must match the number of agents")
    validate_step_sizes(problem, steps, graph=graph).raise_if_failed()
    n, m = problem.n_agents, problem.m
    gamma = steps.gamma_scalar()
    adj = adjacency_matrix(graph)
    deg = degrees(graph).astype(float)
    tau, kappa = steps.tau, steps.kappa
    cone = problem.cone
    xi = problem.check_iterate(xi0)
    y = np.zeros((n, m))
    s = np.zeros((n, m))  # running dual state; start matches y = 0
    erg = ErgodicAverage()
    recorded = _record_set(n_iters, record)
    rows, snaps = [], []
    comms = 0
    for k in range(1, n_iters + 1):
        xi_new = []
        for i, a in enumerate(problem.agents):
            step = xi[i] - tau[i] * (a.grad_f(xi[i]) + a.R.T @ y[i])
            xi_new.append(a.prox.apply(step, tau[i]))
        p = adj @ s - deg[:, None] * s
        comms += 1
        y_new = np.empty_like(y)
        for i, a in enumerate(problem.agents):
            z = y[i] + kappa[i] * (
                a.R @ (2.0 * xi_new[i] - xi[i]) - a.r + gamma * p[i]
            )
            y_new[i] = project_polar(cone, z)
        s += 2.0 * y_new - y
        xi, y = xi_new, y_new
        erg.update(xi, y)
        if k % check_every == 0 or k == n_iters:
            _check_finite(k, y, *xi)
        if k in recorded:
            xi_bar, y_bar = erg.xi, erg.y
            snaps.append(Snapshot(k=k, comms=comms, xi_bar=xi_bar, y_bar=y_bar))
            if context is not None:
                rows.append(context.row(k, comms, xi, y, xi_bar, y_bar))
    return RunTrace(algorithm="dpda-s", n_iters=n_iters, rows=rows,
                    snapshots=snaps, xi=xi, y=y, comms=comms,
                    extras={"s": s, "graph": graph})


def dpda_d_run(problem: SharingProblem, mixer: Mixer, steps: StepSizes,
               n_iters: int, xi0, *, context: MetricContext | None = None,
               record=None, strict: bool = True,
               check_every: int = 100) -> RunTrace:
    """Distributed primal-dual iterations with budgeted consensus mixing.

    The dual disagreement is tracked by an auxiliary state v: each iteration
    mixes ``v / gamma + y`` toward consensus, updates v with the mixing
    residual, then runs the same primal prox step as the static solver and a
    dual step projected onto the polar cone intersected with the mixer's
    norm ball.
    """
    n, m = problem.n_agents, problem.m
    geom = mixer.geom
    if geom.n_agents != n or geom.block_dim != m:
        raise ValueError("mixer geometry must match the problem shape")
    validate_step_sizes(problem, steps, dynamic=True,
                        strict=strict).raise_if_failed()
    gvec = steps.gamma_vector(n)
    if geom.weights is not None:
        if not np.allclose(geom.weights, gvec):
            raise ValueError("mixer weights must equal the per-agent gamma")
    elif np.ndim(steps.gamma) != 0:
        raise ValueError("per-agent gamma needs a weighted mixer geometry")
    tau, kappa = steps.tau, steps.kappa
    radius = geom.radius
    cone = problem.cone
    xi = problem.check_iterate(xi0)
    y = np.zeros((n, m))
    v = np.zeros((n, m))
    erg = ErgodicAverage()
    recorded = _record_set(n_iters, record)
    rows, snaps = [], []
    comms = 0
    for k in range(1, n_iters + 1):
        vc = v / gvec[:, None] + y
        mixed, used = mixer.mix(vc)
        comms += used
        v_new = gvec[:, None] * (vc - mixed)
        xi_new = []
        for i, a in enumerate(problem.agents):
            step = xi[i] - tau[i] * (a.grad_f(xi[i]) + a.R.T @ y[i])
            xi_new.append(a.prox.apply(step, tau[i]))
        y_new = np.empty_like(y)
        for i, a in enumerate(problem.agents):
            z = y[i] + kappa[i] * (
                a.R @ (2.0 * xi_new[i] - xi[i]) - a.r
                - (2.0 * v_new[i] - v[i])
            )
            y_new[i] = project_cone_ball(cone, radius, z)
        xi, y, v = xi_new, y_new, v_new
        erg.update(xi, y)
        if k % check_every == 0 or k == n_iters:
            _check_finite(k, y, v, *xi)
        if k in recorded:
            xi_bar, y_bar = erg.xi, erg.y
            snaps.append(Snapshot(k=k, comms=comms, xi_bar=xi_bar, y_bar=y_bar))
            if context is not None:
                rows.append(context.row(k, comms, xi, y, xi_bar, y_bar))
    return RunTrace(algorithm="dpda-d", n_iters=n_iters, rows=rows,
                    snapshots=snaps, xi=xi, y=y, comms=comms,
                    extras={"v": v})


def centralized_pda_run(problem: SharingProblem, n_iters: int, *,
                        nu_x: float | None = None, nu_y: float | None = None,
                        xi0=None, context: MetricContext | None = None,
                        record=None, check_every: int = 500) -> RunTrace:
    """Single-machine primal-dual reference with one shared multiplier.

    Default steps use L = max_i L_i and the operator norm sigma of the
    concatenated coupling matrix: nu_x = 1/(L + sigma), nu_y = 1/sigma,
    which meets (1/nu_x - L)/nu_y >= sigma^2 with equality.
    """
    n, m = problem.n_agents, problem.m
    big_l = max(a.lipschitz for a in problem.agents)
    sigma = float(np.linalg.norm(np.hstack([a.R for a in problem.agents]), 2))
    if sigma == 0:
        raise ValueError("coupling matrices are all zero")
    if nu_x is None:
        nu_x = 1.0 / (big_l + sigma)
    if nu_y is None:
        nu_y = 1.0 / sigma
    if nu_x <= 0 or nu_y <= 0:
        raise StepSizeError("steps must be positive")
    if (1.0 / nu_x - big_l) / nu_y < sigma**2 - 1e-9:
        raise StepSizeError(
            "centralized steps fail (1/nu_x - L)/nu_y >= sigma^2"
        )
    cone = problem.cone
    r_total = problem.r_total
    xi = problem.check_iterate(
        xi0 if xi0 is not None else [np.zeros(d) for d in problem.dims]
    )
    y = np.zeros(m)
    erg = ErgodicAverage()
    recorded = _record_set(n_iters, record)
    rows, snaps = [], []
    for k in range(1, n_iters + 1):
        xi_new = []
        for a, x in zip(problem.agents, xi):
            step = x - nu_x * (a.grad_f(x) + a.R.T @ y)
            xi_new.append(a.prox.apply(step, nu_x))
        g = -r_total
        for a, x_new, x in zip(problem.agents, xi_new, xi):
            g = g + a.R @ (2.0 * x_new - x)
        y = project_polar(cone, y + nu_y * g)
        xi = xi_new
        erg.update(xi, y)
        if k % check_every == 0 or k == n_iters:
            _check_finite(k, y, *xi)
        if k in recorded:
            xi_bar, y_bar = erg.xi, erg.y
            snaps.append(Snapshot(k=k, comms=0, xi_bar=xi_bar, y_bar=y_bar))
            if context is not None:
                rows.append(context.row(k, 0, xi, y, xi_bar, y_bar))
    return RunTrace(algorithm="centralized-pda", n_iters=n_iters, rows=rows,
                    snapshots=snaps, xi=xi, y=y, comms=0)


# ---------------------------------------------------------------------------
# reference solutions

@dataclass
class Reference:
    """High-accuracy solution: per-agent primal blocks, the shared
    multiplier, and the optimal value."""

    xi: list
    y: np.ndarray
    phi: float
    iterations: int
    converged: bool

    @property
    def y_norm(self):
        return float(np.linalg.norm(self.y))


def reference_solution(problem: SharingProblem, *, tol: float = 1e-10,
                       max_iters: int = 200_000, check_every: int = 200,
                       nu_x: float | None = None,
                       nu_y: float | None = None) -> Reference:
    """Solve to high accuracy with the centralized iteration.

    Stops when the largest componentwise change across ``check_every``
    iterations falls below ``tol``.
    """
    big_l = max(a.lipschitz for a in problem.agents)
    sigma = float(np.linalg.norm(np.hstack([a.R for a in problem.agents]), 2))
    if sigma == 0:
        raise ValueError("coupling matrices are all zero")
    if nu_x is None:
        nu_x = 1.0 / (big_l + sigma)
    if nu_y is None:
        nu_y = 1.0 / sigma
    cone = problem.cone
    r_total = problem.r_total
    xi = [np.zeros(d) for d in problem.dims]
    y = np.zeros(problem.m)
    xi_prev = [x.copy() for x in xi]
    y_prev = y.copy()
    converged = False
    k = 0
    while k < max_iters:
        for _ in range(check_every):
            k += 1
            xi_new = []
            for a, x in zip(problem.agents, xi):
                step = x - nu_x * (a.grad_f(x) + a.R.T @ y)
                xi_new.append(a.prox.apply(step, nu_x))
            g = -r_total
            for a, x_new, x in zip(problem.agents, xi_new, xi):
                g = g + a.R @ (2.0 * x_new - x)
            y = project_polar(cone, y + nu_y * g)
            xi = xi_new
        _check_finite(k, y, *xi)
        delta = max(
            max(float(np.max(np.abs(x - xp))) for x, xp in zip(xi, xi_prev)),
            float(np.max(np.abs(y - y_prev), initial=0.0)),
        )
        if delta < tol:
            converged = True
            break
        xi_prev = [x.copy() for x in xi]
        y_prev = y.copy()
    return Reference(xi=xi, y=y, phi=problem.objective(xi),
                     iterations=k, converged=converged)


def sharing_metric_context(problem: SharingProblem,
                           reference: Reference | None = None) -> MetricContext:
    """Generic metrics: objective from the problem, violation as the cone
    distance of the coupling vector."""
    return MetricContext(
        objective=problem.objective,
        violation=lambda xi: dist_cone(problem.cone, problem.coupling(xi)),
        phi_star=None if reference is None else reference.phi,
        y_star=None if reference is None else reference.y,
    )


# ---------------------------------------------------------------------------
# ergodic gap values and their guarantees

def ergodic_gap_static(problem: SharingProblem, graph: Graph, snapshot,
                       y_star) -> float:
    """Network disagreement of the averaged multipliers plus the weighted
    constraint violation of the averaged primal iterate."""
    y_norm = float(np.linalg.norm(y_star))
    return edge_disagreement_norm(snapshot.y_bar, graph) + y_norm * dist_cone(
        problem.cone, problem.coupling(snapshot.xi_bar)
    )


def ergodic_gap_dynamic(problem: SharingProblem, geom: ConsensusGeometry,
                        snapshot, y_star) -> float:
    """Distance of the averaged multipliers to the consensus set plus the
    weighted constraint violation of the averaged primal iterate."""
    y_bar = snapshot.y_bar
    d_cons = float(np.linalg.norm(y_bar - exact_projection(geom, y_bar)))
    y_norm = float(np.linalg.norm(y_star))
    return d_cons + y_norm * dist_cone(
        problem.cone, problem.coupling(snapshot.xi_bar)
    )


def ergodic_gap_bound_static(problem: SharingProblem, steps: StepSizes,
                             xi0, reference: Reference) -> float:
    """Constant bounding K times the static ergodic gap for every horizon K.

    Value: 1/(2 gamma) + sum_i [ ||xi_i* - xi_i^0||^2 / tau_i
    + 4 ||y*||^2 / kappa_i ].
    """
    gamma = steps.gamma_scalar()
    y_sq = float(np.linalg.norm(reference.y)) ** 2
    total = 1.0 / (2.0 * gamma)
    for i, (x_star, x0) in enumerate(zip(reference.xi, xi0)):
        diff = float(np.linalg.norm(np.asarray(x_star) - np.asarray(x0))) ** 2
        total += diff / steps.tau[i] + 4.0 * y_sq / steps.kappa[i]
    return total


def ergodic_gap_bound_dynamic(problem: SharingProblem, steps: StepSizes,
                              xi0, reference: Reference, dual_radius: float,
                              budget: Budget, log_alpha: float,
                              gamma_factor: float, n_iters: int):
    """Per-horizon bound on K times the dynamic ergodic gap.

    Entry K-1 of the returned array is the same constant as the static bound
    plus the accumulated mixing-error term
    ``16 N^2 B^2 Gamma gamma * sum_{k<=K} alpha^{q_{k-1}} k (k+1)`` where B
    is half the dual ball radius and (Gamma, alpha) describe the mixing decay.
    """
    theta = ergodic_gap_bound_static(problem, steps, xi0, reference)
    gamma = steps.gamma_scalar()
    n = problem.n_agents
    b = dual_radius / 2.0
    c_const = 16.0 * n**2 * b**2 * gamma_factor * gamma
    ks = np.arange(1, n_iters + 1, dtype=float)
    qs = np.array([budget.rounds_for(k - 1) for k in range(1, n_iters + 1)],
                  dtype=float)
    terms = c_const * np.exp(qs * log_alpha) * ks * (ks + 1.0)
    return theta + np.cumsum(terms)
