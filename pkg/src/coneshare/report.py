"""Figure rendering for experiment output directories.

Reads the aggregated CSV written by the harness and renders a convergence
figure next to it.  Zero or negative values cannot sit on a log axis, so they
are dropped from the corresponding curve rather than clipped.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PANELS = (
    ("suboptimality", "subopt_rel", "subopt_rel_erg"),
    ("infeasibility", "infeas", "infeas_erg"),
    ("consensus gap", "consensus", "consensus_erg"),
)


def _read_csv(path):
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return {
        key: [float(row[key]) for row in rows] for key in rows[0].keys()
    }


def render_convergence(csv_path, out_path, title=None):
    """Three-panel log-log convergence figure from an aggregate CSV."""
    data = _read_csv(csv_path)
    ks = data["k"]
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))
    for ax, (label, col, col_erg) in zip(axes, _PANELS):
        for name, style in ((col, "-"), (col_erg, "--")):
            pairs = [(k, v) for k, v in zip(ks, data[name]) if v > 0.0]
            if pairs:
                ax.loglog([p[0] for p in pairs], [p[1] for p in pairs],
                          style, label=name)
        ax.set_xlabel("iteration k")
        ax.set_title(label)
        ax.grid(True, which="both", alpha=0.3)
        if ax.get_lines():
            ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_run(out_dir) -> list[Path]:
    """Render all figures for a finished run directory."""
    out_dir = Path(out_dir)
    figure = render_convergence(out_dir / "aggregate.csv",
                                out_dir / "convergence.png",
                                title=out_dir.name)
    return [figure]
