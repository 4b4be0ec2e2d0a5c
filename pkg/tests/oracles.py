"""Independent reference implementations used to check the library.

Everything here is deliberately written without reusing library code paths:
constrained projections go through scipy.optimize, weight matrices are built
with explicit loops, quantiles come from numerically integrated densities,
and the tiny basis-pursuit solver enumerates supports.  Slow and simple on
purpose.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, optimize


# ---------------------------------------------------------------------------
# cone projections


def project_orthant_oracle(y):
    y = np.asarray(y, dtype=float)
    x0 = np.clip(y, 0.0, None) + 1e-3
    res = optimize.minimize(
        lambda x: 0.5 * np.sum((x - y) ** 2),
        x0,
        jac=lambda x: x - y,
        bounds=[(0.0, None)] * y.size,
        method="L-BFGS-B",
        options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 500},
    )
    return res.x


def project_soc_oracle(y):
    """Projection onto {(v, t): ||v|| <= t} by planar reduction.

    The optimal vector part is parallel to v, so the problem reduces to
    projecting (||v||, t) onto the wedge {(a, s): 0 <= a <= s} in the plane,
    which is solved by comparing the finitely many face candidates.  This is
    a different derivation from any closed-form case split on (t, ||v||).
    """
    y = np.asarray(y, dtype=float)
    v, s = y[:-1], float(y[-1])
    nv = float(np.linalg.norm(v))
    cands = []
    if 0.0 <= nv <= s:
        cands.append((nv, s))  # already feasible
    cands.append((0.0, max(s, 0.0)))  # a = 0 face
    mid = 0.5 * (nv + s)
    if mid >= 0.0:
        cands.append((mid, mid))  # a = s face
    cands.append((0.0, 0.0))
    a, t = min(cands, key=lambda c: (c[0] - nv) ** 2 + (c[1] - s) ** 2)
    vec = v * (a / nv) if nv > 0 else np.zeros_like(v)
    return np.concatenate([vec, [t]])


def _polar_projection(kind, x):
    if isinstance(kind, (list, tuple)):
        # product cones: the polar splits blockwise even though the ball
        # does not, so Dykstra only needs the blockwise polar map
        out, off = [], 0
        for k, d in kind:
            out.append(_polar_projection(k, x[off:off + d]))
            off += d
        return np.concatenate(out)
    if kind == "orthant":
        return np.minimum(x, 0.0)
    if kind == "soc":
        # the cone is self-dual, so its polar is its negation
        return -project_soc_oracle(-np.asarray(x, dtype=float))
    raise ValueError(kind)


def project_polar_ball_oracle(kind, radius, y, n_iters=4000):
    """Projection onto (polar cone) intersect (radius ball) via Dykstra's
    alternating scheme between the two sets."""
    y = np.asarray(y, dtype=float)

    def ball(x):
        nrm = np.linalg.norm(x)
        return x if nrm <= radius else x * (radius / nrm)

    x = y.copy()
    p = np.zeros_like(y)
    q = np.zeros_like(y)
    for _ in range(n_iters):
        z = _polar_projection(kind, x + p)
        p = x + p - z
        x_new = ball(z + q)
        q = z + q - x_new
        if np.linalg.norm(x_new - x) < 1e-15:
            x = x_new
            break
        x = x_new
    return x


# ---------------------------------------------------------------------------
# proximal maps by grid search


def prox_grid_oracle(func, x, step, lo=-6.0, hi=6.0, points=240001):
    """argmin_z func(z) + ||z - x||^2 / (2 step) on a fine 1-D grid."""
    grid = np.linspace(lo, hi, points)
    vals = func(grid) + (grid - x) ** 2 / (2.0 * step)
    return float(grid[np.argmin(vals)])


# ---------------------------------------------------------------------------
# weight matrices with explicit loops


def metropolis_oracle(n, edges):
    """Metropolis weights from an undirected edge list, loop by loop."""
    deg = [0] * n
    for (u, v) in edges:
        deg[u - 1] += 1
        deg[v - 1] += 1
    w = np.zeros((n, n))
    for (u, v) in edges:
        i, j = u - 1, v - 1
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        w[i, i] = 1.0 - sum(w[i, j] for j in range(n) if j != i)
    return w


def pushsum_oracle(n, arcs):
    """Column-stochastic push-sum weights from a directed arc list."""
    out_deg = [1] * n  # self term
    for (u, _v) in arcs:
        out_deg[u - 1] += 1
    w = np.zeros((n, n))
    for j in range(n):
        w[j, j] = 1.0 / out_deg[j]
    for (u, v) in arcs:
        w[v - 1, u - 1] = 1.0 / out_deg[u - 1]
    return w


def mixing_rounds_oracle(matrices, blocks):
    """Apply per-round weight matrices to stacked blocks, one round at a
    time, returning the plain (unclipped, unweighted) average iterate."""
    out = np.array(blocks, dtype=float)
    for w in matrices:
        out = w @ out
    return out


def pushsum_ratio_oracle(matrices, blocks):
    """Ratio push-sum trace: numerators seeded with the blocks, denominators
    with ones; returns per-node ratios after all rounds."""
    num = np.array(blocks, dtype=float)
    den = np.ones(num.shape[0])
    for w in matrices:
        num = w @ num
        den = w @ den
    return num / den[:, None]


# ---------------------------------------------------------------------------
# interior radius of a Slater image by sampling + polish


def interior_radius_soc_oracle(g, n_samples=200000, seed=0):
    """min u.g_y + (1 - ||u||_1) g_t over the l1-normalized dual cone.

    The second-order cone is self-dual.  Feasible points are w = (u, s) with
    s = 1 - ||u||_1 >= ||u||_2.  The objective is linear along each ray of u,
    so per direction only the endpoint matters; a dense direction sample plus
    an SLSQP polish gives the reference value.
    """
    g = np.asarray(g, dtype=float)
    gy, gt = g[:-1], g[-1]
    d = gy.size
    if d == 0:
        return gt
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    l1 = np.abs(dirs).sum(axis=1)
    rho = 1.0 / (1.0 + l1)  # s = rho matches ||u||_2 = rho at the endpoint
    vals = rho * (dirs @ gy) + (1.0 - rho * l1) * gt
    best = float(min(vals.min(), gt))
    best_u = dirs[np.argmin(vals)] * rho[np.argmin(vals)]

    def obj(u):
        return float(u @ gy + (1.0 - np.abs(u).sum()) * gt)

    cons = [{"type": "ineq",
             "fun": lambda u: 1.0 - np.abs(u).sum() - np.linalg.norm(u)}]
    res = optimize.minimize(obj, best_u, constraints=cons, method="SLSQP",
                            options={"maxiter": 500, "ftol": 1e-14})
    if res.success:
        u = res.x
        if 1.0 - np.abs(u).sum() >= np.linalg.norm(u) - 1e-9:
            best = min(best, obj(u))
    return best


# ---------------------------------------------------------------------------
# chi-square quantile from an integrated density


def chi2_cdf_quad(x, dof):
    density = lambda t: t ** (dof / 2.0 - 1.0) * math.exp(-t / 2.0)
    norm = 2.0 ** (dof / 2.0) * math.gamma(dof / 2.0)
    val, _err = integrate.quad(density, 0.0, x, limit=200)
    return val / norm


def chi2_quantile_quad(p, dof):
    lo, hi = 0.0, 10.0 * dof + 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf_quad(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# tiny basis pursuit by support enumeration


def enum_l1_equality(R, r, residual_tol=1e-9):
    """Minimum l1 norm subject to R x = r, by enumerating supports.

    Only valid when some optimal solution has support size <= m, which holds
    for basis pursuit (a vertex solution of the associated LP).
    """
    R = np.asarray(R, dtype=float)
    r = np.asarray(r, dtype=float)
    m, n = R.shape
    best_val, best_x = np.inf, None
    for size in range(0, m + 1):
        for support in itertools.combinations(range(n), size):
            if size == 0:
                if np.linalg.norm(r) < residual_tol:
                    val, x = 0.0, np.zeros(n)
                else:
                    continue
            else:
                cols = R[:, support]
                sol, *_ = np.linalg.lstsq(cols, r, rcond=None)
                if np.linalg.norm(cols @ sol - r) >= residual_tol:
                    continue
                x = np.zeros(n)
                x[list(support)] = sol
                val = float(np.abs(sol).sum())
            if val < best_val - 1e-15:
                best_val, best_x = val, x
    return best_val, best_x


def l1_conic_lp_oracle(blocks_R, r_total):
    """Solve min sum_i ||x_i||_1 s.t. sum_i R_i x_i - r >= 0 as a linear
    program via the positive/negative split, returning (value, x blocks,
    conic multiplier).

    The multiplier is reported in the nonpositive orthant, matching the
    convention y in (polar cone) with objective stationarity 0 in
    d||.||_1 + R' y.
    """
    mats = [np.asarray(R, dtype=float) for R in blocks_R]
    r = np.asarray(r_total, dtype=float)
    big = np.hstack(mats)
    m, n = big.shape
    c = np.ones(2 * n)
    a_ub = np.hstack([-big, big])  # R(u - v) >= r as -R(u - v) <= -r
    res = optimize.linprog(c, A_ub=a_ub, b_ub=-r, bounds=(0, None),
                           method="highs")
    if not res.success:
        raise RuntimeError(f"reference LP failed: {res.message}")
    x = res.x[:n] - res.x[n:]
    out, pos = [], 0
    for mat in mats:
        out.append(x[pos:pos + mat.shape[1]])
        pos += mat.shape[1]
    return float(res.fun), out, np.asarray(res.ineqlin.marginals, dtype=float)
