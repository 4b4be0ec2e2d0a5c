"""Communication graphs, gossip weight matrices, and round schedules.

Nodes are labelled 1..N in every public structure; matrices are indexed with
node i on row/column i-1.  Undirected neighbourhoods exclude the node itself;
directed in/out-neighbourhoods include it, and out-degrees count the self
loop, which is the convention the push-sum weights require.  Edge lists never
contain explicit self loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Graph:
    """A single-round topology: ``edges`` is an (k, 2) int array, 1-based."""

    n_nodes: int
    edges: np.ndarray
    directed: bool = False

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", e)
        if e.size:
            if e.min() < 1 or e.max() > self.n_nodes:
                raise ValueError("edge endpoints must lie in [1, n_nodes]")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self loops are not allowed in edge lists")
            lo, hi = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
            keys = e[:, 0] * (self.n_nodes + 1) + e[:, 1] if self.directed \
                else lo * (self.n_nodes + 1) + hi
            if np.unique(keys).size != e.shape[0]:
                raise ValueError("duplicate edges in edge list")

    @property
    def n_edges(self):
        return int(self.edges.shape[0])

    def edge_list(self):
        """Edges as a list of (u, v) int tuples, in stored order."""
        return [(int(u), int(v)) for u, v in self.edges]


def degrees(graph: Graph):
    """Degree vector; undirected counts incident edges, directed counts
    out-edges plus the implicit self loop."""
    n = graph.n_nodes
    e = graph.edges
    if graph.directed:
        d = np.bincount(e[:, 0] - 1, minlength=n) + 1
    else:
        d = np.bincount(e[:, 0] - 1, minlength=n) + np.bincount(
            e[:, 1] - 1, minlength=n
        )
    return d.astype(np.int64)


def neighbors(graph: Graph, i: int):
    """Sorted neighbours of node ``i`` (undirected graphs only, self excluded)."""
    if graph.directed:
        raise ValueError("neighbors() is defined for undirected graphs")
    e = graph.edges
    out = np.concatenate([e[e[:, 0] == i, 1], e[e[:, 1] == i, 0]])
    return np.sort(out)


def adjacency_matrix(graph: Graph):
    """0/1 adjacency, symmetric for undirected graphs, no self loops."""
    n = graph.n_nodes
    a = np.zeros((n, n))
    e = graph.edges
    if e.size:
        a[e[:, 0] - 1, e[:, 1] - 1] = 1.0
        if not graph.directed:
            a[e[:, 1] - 1, e[:, 0] - 1] = 1.0
    return a

def metropolis_matrix(graph: Graph):
    """Symmetric doubly stochastic gossip weights for an undirected round.

    Off-diagonal weight 1/(1 + max(d_i, d_j)) on edges, diagonal absorbs the
    remainder.  Every nonzero entry is >= 1/(1 + max degree).
    """
    if graph.directed:
        raise ValueError("metropolis weights need an undirected graph")
    n = graph.n_nodes
    v = np.zeros((n, n))
    e = graph.edges
    if e.size:
        d = degrees(graph)
        u, w = e[:, 0] - 1, e[:, 1] - 1
        wt = 1.0 / (1.0 + np.maximum(d[u], d[w]))
        v[u, w] = wt
        v[w, u] = wt
    np.fill_diagonal(v, 1.0 - v.sum(axis=1))
    return v


def pushsum_matrix(graph: Graph):
    """Column stochastic push-sum weights for a directed round.

    Column j spreads 1/d_j over j's out-neighbourhood (self included), where
    d_j is the out-degree counting the self loop.
    """
    if not graph.directed:
        raise ValueError("push-sum weights need a directed graph")
    n = graph.n_nodes
    d = degrees(graph)
    v = np.zeros((n, n))
    e = graph.edges
    if e.size:
        u, w = e[:, 0] - 1, e[:, 1] - 1
        # node u sends to w, so receiver row w takes column u's share
        v[w, u] = 1.0 / d[u]
    np.fill_diagonal(v, 1.0 / d)
    return v


def weight_matrix(graph: Graph):
    """Gossip weights for one round, dispatching on directedness."""
    return pushsum_matrix(graph) if graph.directed else metropolis_matrix(graph)


def incidence_matrix(graph: Graph):
    """Oriented edge-node incidence, one row per edge: +1 at u, -1 at v."""
    h = np.zeros((graph.n_edges, graph.n_nodes))
    for row, (u, v) in enumerate(graph.edges):
        h[row, u - 1] = 1.0
        h[row, v - 1] = -1.0
    return h


def is_connected(graph: Graph):
    """Connectivity ignoring edge directions."""
    return _reachable_all(graph, symmetric=True)


def is_strongly_connected(graph: Graph):
    """Every node reachable from node 1 and vice versa along directions."""
    if not graph.directed:
        return is_connected(graph)
    return _reachable_all(graph, symmetric=False) and _reachable_all(
        graph, symmetric=False, reverse=True
    )


def _reachable_all(graph, symmetric, reverse=False):
    n = graph.n_nodes
    adj = [[] for _ in range(n)]
    for u, v in graph.edges:
        a, b = (v - 1, u - 1) if reverse else (u - 1, v - 1)
        adj[a].append(b)
        if symmetric:
            adj[b].append(a)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in adj[i]:
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return bool(seen.all())


def small_world(n_nodes: int, n_edges: int, seed):
    """Random connected small-world graph: a random cycle plus extra edges.

    Parameters
    ----------
    n_nodes : int, >= 3
    n_edges : int
        Total edge count; the first ``n_nodes`` form the cycle, the remaining
        ``n_edges - n_nodes`` are drawn uniformly without replacement from the
        non-cycle pairs.
    seed : int or numpy Generator
    """
    if n_nodes < 3:
        raise ValueError("small-world generation needs at least 3 nodes")
    n_extra = n_edges - n_nodes
    max_extra = n_nodes * (n_nodes - 1) // 2 - n_nodes
    if not 0 <= n_extra <= max_extra:
        raise ValueError(
            f"n_edges must lie in [{n_nodes}, {n_nodes + max_extra}], got {n_edges}"
        )
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    perm = rng.permutation(n_nodes) + 1
    cycle = [(int(perm[i]), int(perm[(i + 1) % n_nodes])) for i in range(n_nodes)]
    taken = {(min(u, v), max(u, v)) for u, v in cycle}
    cands = [
        (u, v)
        for u in range(1, n_nodes + 1)
        for v in range(u + 1, n_nodes + 1)
        if (u, v) not in taken
    ]
    picks = rng.choice(len(cands), size=n_extra, replace=False) if n_extra else []
    edges = cycle + [cands[int(i)] for i in picks]
    return Graph(n_nodes, np.asarray(edges, dtype=np.int64), directed=False)


def digraph_12():
    """Bundled 12-node benchmark digraph: 24 arcs, strongly connected,
    one bidirected pair (6, 8)."""
    arcs = [
        (1, 10), (1, 6), (8, 1), (8, 10), (8, 6), (6, 8), (6, 3), (11, 1),
        (9, 11), (9, 3), (9, 5), (4, 9), (4, 11), (7, 4), (7, 12), (7, 6),
        (2, 10), (12, 6), (12, 2), (12, 5), (3, 12), (5, 3), (10, 7), (10, 5),
    ]
    return Graph(12, np.asarray(arcs, dtype=np.int64), directed=True)


# ---------------------------------------------------------------------------
# round schedules

class Schedule:
    """Sequence of single-round graphs; ``round(t)`` for t = 0, 1, 2, ..."""

    n_nodes: int
    directed: bool
    window: int  # rounds per window whose union is the full base graph

    def round(self, t: int) -> Graph:  # pragma: no cover - abstract
        raise NotImplementedError


class StaticSchedule(Schedule):
    """Same graph every round."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.n_nodes = graph.n_nodes
        self.directed = graph.directed
        self.window = 1

    def round(self, t):
        return self.graph


class WindowSchedule(Schedule):
    """Random activation schedule with windowed coverage.

    Each window of ``window`` consecutive rounds covers the base edge set: the
    first ``window - 1`` rounds independently activate ``ceil(p * n_edges)``
    edges uniformly without replacement, and the final round consists of the
    base edges missed so far in the window (possibly none).  Windows are
    generated deterministically from (seed, window index), so any round can be
    regenerated in isolation.
    """

    def __init__(self, base: Graph, window: int = 5, activation: float = 0.8,
                 seed: int = 0):
        if window < 1:
            raise ValueError("window length must be >= 1")
        if not 0.0 < activation <= 1.0:
            raise ValueError("activation probability must be in (0, 1]")
        if base.n_edges == 0:
            raise ValueError("base graph must have at least one edge")
        self.base = base
        self.n_nodes = base.n_nodes
        self.directed = base.directed
        self.window = int(window)
        self.activation = float(activation)
        self.seed = int(seed)
        self._cached = (-1, None)

    def _window_graphs(self, w):
        cached_w, graphs = self._cached
        if cached_w == w:
            return graphs
        rng = np.random.default_rng([self.seed, w])
        base_edges = self.base.edges
        n_e = base_edges.shape[0]
        n_act = math.ceil(self.activation * n_e)
        used = np.zeros(n_e, dtype=bool)
        graphs = []
        for _ in range(self.window - 1):
            idx = rng.choice(n_e, size=n_act, replace=False)
            used[idx] = True
            graphs.append(Graph(self.n_nodes, base_edges[np.sort(idx)],
                                directed=self.directed))
        graphs.append(Graph(self.n_nodes, base_edges[~used],
                            directed=self.directed))
        self._cached = (w, graphs)
        return graphs

    def round(self, t):
        if t < 0:
            raise ValueError("round index must be >= 0")
        return self._window_graphs(t // self.window)[t % self.window]


def weight_product(schedule: Schedule, s: int, t: int):
    """Product of round weights V^t V^(t-1) ... V^(s+1); identity when t == s.

    Dense reference used by tests and by nothing on the hot path.
    """
    if t < s:
        raise ValueError("need t >= s")
    w = np.eye(schedule.n_nodes)
    for tau in range(s + 1, t + 1):
        w = weight_matrix(schedule.round(tau)) @ w
    return w


@dataclass(frozen=True)
class MixingDecay:
    """Geometric decay model for inexact averaging: error factor
    gamma_factor * exp(log_alpha * rounds)."""

    gamma_factor: float
    log_alpha: float

    @property
    def alpha(self):
        return math.exp(self.log_alpha)


def conservative_decay(schedule: Schedule, base: Graph | None = None):
    """Worst-case decay constants from degrees alone.

    Undirected: smallest positive Metropolis weight zeta = 1/(1 + max degree)
    over the base graph, contraction over T = (N - 1) * window rounds.
    Directed: delta = N^(-N * window), contraction per window.  These are
    loose by design; fit an empirical decay when sharpness matters.
    """
    base = base if base is not None else getattr(schedule, "base",
                                                getattr(schedule, "graph", None))
    if base is None:
        raise ValueError("schedule does not expose a base graph")
    n = schedule.n_nodes
    m = schedule.window
    if schedule.directed:
        log_delta = -n * m * math.log(n)
        delta = math.exp(log_delta)  # underflows to 0 for large N*M
        gamma = 8.0 * math.exp(-log_delta) if -log_delta < 700 else math.inf
        log_alpha = math.log1p(-delta) / m
        return MixingDecay(gamma_factor=gamma, log_alpha=log_alpha)
    zeta = 1.0 / (1.0 + int(degrees(base).max()))
    t_bar = (n - 1) * m
    zt = zeta**t_bar
    gamma = 2.0 * (1.0 + zeta**-t_bar) / (1.0 - zt)
    log_alpha = math.log1p(-zt) / t_bar
    return MixingDecay(gamma_factor=gamma, log_alpha=log_alpha)


# ---------------------------------------------------------------------------
# edge-list serialization: header "directed N" or "undirected N", then "u v"

def save_edge_list(graph: Graph, path):
    kind = "directed" if graph.directed else "undirected"
    lines = [f"{kind} {graph.n_nodes}"]
    lines += [f"{u} {v}" for u, v in graph.edge_list()]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edge_list(path):
    with open(path, "r", encoding="ascii") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ValueError(f"{path}: empty edge-list file")
    head = raw[0].split()
    if len(head) != 2 or head[0] not in ("directed", "undirected"):
        raise ValueError(f"{path}: header must be 'directed N' or 'undirected N'")
    try:
        n = int(head[1])
    except ValueError as exc:
        raise ValueError(f"{path}: bad node count {head[1]!r}") from exc
    edges = []
    for ln in raw[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad edge line {ln!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ValueError(f"{path}: bad edge line {ln!r}") from exc
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return Graph(n, arr, directed=(head[0] == "directed"))
