"""Progress measures shared by every solver and the CSV row schema.

Three measures are tracked, each for the last iterate and for the running
ergodic average: relative suboptimality, coupling-constraint violation, and
the dual consensus gap (worst distance of an agent's multiplier from the
network mean).  Solvers without a network report a zero consensus gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .graphs import Graph, incidence_matrix

#: fixed column order of the per-replication CSV files
CSV_COLUMNS = (
    "rep", "k", "comms", "subopt_rel", "infeas", "consensus",
    "subopt_rel_erg", "infeas_erg", "consensus_erg", "elapsed_ms",
)

#: unless the reference objective exceeds this, suboptimality is reported in
#: absolute terms (a nonpositive or vanishing reference makes ratios
#: meaningless)
RELATIVE_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricRow:
    k: int
    comms: int
    subopt_rel: float
    infeas: float
    consensus: float
    subopt_rel_erg: float
    infeas_erg: float
    consensus_erg: float


def consensus_gap(y_blocks):
    """max_i ||y_i - mean_j y_j||; zero for a single shared multiplier."""
    y = np.asarray(y_blocks, dtype=float)
    if y.ndim == 1:
        return 0.0
    dev = y - y.mean(axis=0)
    return float(np.max(np.linalg.norm(dev, axis=1)))


def edge_disagreement_norm(y_blocks, graph: Graph):
    """Norm of all edgewise multiplier differences y_u - y_v, stacked."""
    y = np.asarray(y_blocks, dtype=float)
    h = incidence_matrix(graph)
    return float(np.linalg.norm(h @ y))


@dataclass
class MetricContext:
    """Bundles the problem-specific callables the measures need.

    objective maps the list of per-agent iterates to the objective value;
    violation maps it to the scalar constraint violation.  When phi_star is
    None the suboptimality columns are NaN; when it is ~0 the suboptimality
    is absolute rather than relative.
    """

    objective: Callable[[Sequence[np.ndarray]], float]
    violation: Callable[[Sequence[np.ndarray]], float]
    phi_star: float | None = None
    y_star: np.ndarray | None = None

    @property
    def absolute_suboptimality(self) -> bool:
        """True when the gap is reported unnormalized."""
        return self.phi_star is not None and self.phi_star <= RELATIVE_FLOOR

    def suboptimality(self, xi):
        if self.phi_star is None:
            return float("nan")
        gap = abs(self.objective(xi) - self.phi_star)
        if self.phi_star > RELATIVE_FLOOR:
            return gap / self.phi_star
        return gap

    def row(self, k, comms, xi, y, xi_erg, y_erg) -> MetricRow:
        return MetricRow(
            k=int(k),
            comms=int(comms),
            subopt_rel=self.suboptimality(xi),
            infeas=float(self.violation(xi)),
            consensus=consensus_gap(y),
            subopt_rel_erg=self.suboptimality(xi_erg),
            infeas_erg=float(self.violation(xi_erg)),
            consensus_erg=consensus_gap(y_erg),
        )


class ErgodicAverage:
    """Running mean of the per-agent iterates and the multiplier state."""

    def __init__(self):
        self.count = 0
        self._xi = None
        self._y = None

    def update(self, xi, y):
        if self.count == 0:
            self._xi = [np.array(x, dtype=float) for x in xi]
            self._y = np.array(y, dtype=float)
        else:
            for acc, x in zip(self._xi, xi):
                acc += x
            self._y += y
        self.count += 1

    @property
    def xi(self):
        return [x / self.count for x in self._xi]

    @property
    def y(self):
        return self._y / self.count


def format_value(x) -> str:
    """Shortest round-trip decimal form, stable across runs and platforms."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def format_csv_row(rep: int, row: MetricRow, elapsed_ms: float) -> list[str]:
    return [
        str(int(rep)), str(row.k), str(row.comms),
        format_value(row.subopt_rel), format_value(row.infeas),
        format_value(row.consensus), format_value(row.subopt_rel_erg),
        format_value(row.infeas_erg), format_value(row.consensus_erg),
        format_value(elapsed_ms),
    ]
