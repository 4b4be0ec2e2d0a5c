"""Sparse-recovery benchmark instances and their sharing reformulation.

The benchmark is basis pursuit denoising: recover a sparse signal from noisy
linear measurements by minimising ``||xi||_1`` subject to
``||R xi - r|| <= eps``.  Split across N agents by columns, it becomes a
conically coupled sharing problem: each agent owns a block of columns, the
coupled vector is ``(sum_i R_i xi_i - r, t)`` constrained to the second-order
cone, and the norm budget coordinate t is pinned to eps through a prox term
on the first agent.  With exact measurements (eps = 0) the cone degenerates
to the zero cone and t disappears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .cones import SecondOrder, Zero
from .dualbound import dual_bound
from .metrics import MetricContext
from .prox import L1Norm, PinnedValue, SeparableProx
from .solver import AgentData, Reference, SharingProblem


def chi_square_quantile(p: float, dof: int) -> float:
    """Quantile of the chi-square distribution with ``dof`` degrees."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    return float(2.0 * gammaincinv(dof / 2.0, p))


@dataclass
class BpdInstance:
    """One benchmark instance; ``eps == 0`` marks the noise-free case."""

    R: np.ndarray
    r: np.ndarray
    xi_true: np.ndarray
    eps: float
    kappa: int
    seed: int
    sigma2: float = float("nan")
    snr_db: float | None = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.xi_true = np.asarray(self.xi_true, dtype=float)
        if self.R.ndim != 2:
            raise ValueError("R must be a matrix")
        if self.r.shape != (self.R.shape[0],):
            raise ValueError("r must match the rows of R")
        if self.xi_true.shape != (self.R.shape[1],):
            raise ValueError("xi_true must match the columns of R")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    @property
    def n(self):
        return self.R.shape[1]

    @property
    def m(self):
        return self.R.shape[0]

    @property
    def noise_free(self):
        return self.eps == 0.0


def gen_bpd(n: int = 120, m: int = 20, kappa: int = 20,
            snr_db: float | None = 30.0, alpha: float = 0.05,
            seed: int = 0) -> BpdInstance:
    """Generate an instance with a planted kappa-sparse standard-normal signal.

    The sensing matrix is i.i.d. standard normal.  With a finite ``snr_db``
    the noise variance is ``kappa * 10^(-snr_db/10)`` per coordinate and the
    ball radius eps is calibrated so the noise satisfies
    ``P(||noise|| <= eps) = 1 - alpha``.  ``snr_db=None`` (or infinity) gives
    exact measurements with eps = 0.
    """
    if not 1 <= kappa <= n:
        raise ValueError(f"sparsity must lie in [1, {n}], got {kappa}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    rng = np.random.default_rng(seed)
    support = rng.choice(n, size=kappa, replace=False)
    xi_true = np.zeros(n)
    xi_true[support] = rng.standard_normal(kappa)
    big_r = rng.standard_normal((m, n))
    if snr_db is None or math.isinf(snr_db):
        return BpdInstance(R=big_r, r=big_r @ xi_true, xi_true=xi_true,
                           eps=0.0, kappa=kappa, seed=seed, sigma2=0.0,
                           snr_db=None)
    sigma2 = kappa * 10.0 ** (-snr_db / 10.0)
    noise = math.sqrt(sigma2) * rng.standard_normal(m)
    eps = math.sqrt(sigma2 * chi_square_quantile(1.0 - alpha, m))
    return BpdInstance(R=big_r, r=big_r @ xi_true + noise, xi_true=xi_true,
                       eps=eps, kappa=kappa, seed=seed, sigma2=sigma2,
                       snr_db=float(snr_db))


def default_partition(n: int, n_agents: int) -> list[slice]:
    """Contiguous column blocks, sizes as equal as possible."""
    if not 1 <= n_agents <= n:
        raise ValueError(f"need 1 <= n_agents <= {n}, got {n_agents}")
    base, extra = divmod(n, n_agents)
    out, start = [], 0
    for i in range(n_agents):
        size = base + (1 if i < extra else 0)
        out.append(slice(start, start + size))
        start += size
    return out


def bpd_to_sharing(inst: BpdInstance, n_agents: int) -> SharingProblem:
    """Column-split sharing reformulation.

    Noisy case: coupling dimension m + 1, second-order cone, the first agent
    carries the extra budget coordinate t pinned to eps.  Noise-free case:
    coupling dimension m, zero cone (an equality constraint).
    """
    parts = default_partition(inst.n, n_agents)
    r_share = inst.r / n_agents
    agents = []
    if inst.noise_free:
        for sl in parts:
            agents.append(AgentData(R=inst.R[:, sl], r=r_share,
                                    prox=L1Norm()))
        return SharingProblem(agents=agents, cone=Zero(inst.m))
    for i, sl in enumerate(parts):
        blk = inst.R[:, sl]
        n_i = blk.shape[1]
        r_i = np.concatenate([r_share, [0.0]])
        if i == 0:
            ext = np.zeros((inst.m + 1, n_i + 1))
            ext[:-1, :-1] = blk
            ext[-1, -1] = 1.0
            prox = SeparableProx([(L1Norm(), n_i), (PinnedValue(inst.eps), 1)])
            agents.append(AgentData(R=ext, r=r_i, prox=prox))
        else:
            ext = np.vstack([blk, np.zeros((1, n_i))])
            agents.append(AgentData(R=ext, r=r_i, prox=L1Norm()))
    return SharingProblem(agents=agents, cone=SecondOrder(inst.m + 1))


def signal_from_iterates(inst: BpdInstance, xi) -> np.ndarray:
    """Reassemble the length-n signal from per-agent blocks.

    Accepts both layouts: sharing iterates (first block carries the extra
    budget coordinate, which is dropped) and plain column blocks.
    """
    blocks = [np.asarray(x, dtype=float) for x in xi]
    total = sum(b.shape[0] for b in blocks)
    if total == inst.n + 1:
        blocks[0] = blocks[0][:-1]
    elif total != inst.n:
        raise ValueError(
            f"blocks hold {total} coordinates, expected {inst.n} "
            f"or {inst.n + 1}"
        )
    return np.concatenate(blocks)


def bpd_metric_context(inst: BpdInstance,
                       reference: Reference | None = None) -> MetricContext:
    """Benchmark metrics: l1 objective of the reassembled signal and the
    positive part of the measurement-ball violation."""

    def objective(xi):
        return float(np.sum(np.abs(signal_from_iterates(inst, xi))))

    def violation(xi):
        res = float(np.linalg.norm(inst.R @ signal_from_iterates(inst, xi)
                                   - inst.r))
        return max(res - inst.eps, 0.0)

    return MetricContext(
        objective=objective,
        violation=violation,
        phi_star=None if reference is None else reference.phi,
        y_star=None if reference is None else reference.y,
    )


def uniform_initial(problem: SharingProblem, seed) -> list[np.ndarray]:
    """Per-agent starting blocks with i.i.d. uniform [0, 1) entries."""
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    return [rng.random(d) for d in problem.dims]


def slater_dual_bound(inst: BpdInstance) -> float:
    """Multiplier-norm bound from the least-squares interpolator.

    The minimum-norm solution of ``R xi = r`` leaves the full ball budget as
    interior slack, so it certifies a dual bound without knowing the optimum
    (0 is a valid lower bound for a nonnegative objective).  Only defined in
    the noisy case; the zero cone has no interior.
    """
    if inst.noise_free:
        raise ValueError(
            "no interior certificate exists for exact measurements; "
            "supply a dual bound explicitly"
        )
    xi_ls, *_ = np.linalg.lstsq(inst.R, inst.r, rcond=None)
    gbar = np.concatenate([inst.R @ xi_ls - inst.r, [inst.eps]])
    objective = float(np.sum(np.abs(xi_ls)))
    return dual_bound(SecondOrder(inst.m + 1), gbar, objective, 0.0)


# ---------------------------------------------------------------------------
# plain-text serialization:
#   header "n m kappa eps seed", then R row-major (m lines), r, xi_true

def save_instance(inst: BpdInstance, path):
    lines = [f"{inst.n} {inst.m} {inst.kappa} {inst.eps!r} {inst.seed}"]
    for row in inst.R:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(" ".join(repr(float(v)) for v in inst.r))
    lines.append(" ".join(repr(float(v)) for v in inst.xi_true))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> BpdInstance:
    with open(path, "r", encoding="ascii") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ValueError(f"{path}: empty instance file")
    head = raw[0].split()
    if len(head) != 5:
        raise ValueError(f"{path}: header must be 'n m kappa eps seed'")
    try:
        n, m, kappa = int(head[0]), int(head[1]), int(head[2])
        eps, seed = float(head[3]), int(head[4])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed header {raw[0]!r}") from exc
    body = raw[1:]
    if len(body) != m + 2:
        raise ValueError(f"{path}: expected {m + 2} data lines, got {len(body)}")
    try:
        big_r = np.array([[float(v) for v in ln.split()] for ln in body[:m]])
        r = np.array([float(v) for v in body[m].split()])
        xi_true = np.array([float(v) for v in body[m + 1].split()])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed data line") from exc
    if big_r.shape != (m, n) or r.shape != (m,) or xi_true.shape != (n,):
        raise ValueError(f"{path}: data shapes disagree with the header")
    return BpdInstance(R=big_r, r=r, xi_true=xi_true, eps=eps, kappa=kappa,
                       seed=seed)
