"""Figure rendering from metric journals.

Figures are derived mechanically from journal records, never from prose, so
a figure's lineage always traces back to a run.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness.journal import MetricRecord, records_by_name


def render_metric_figure(records: list[MetricRecord], out_path: str | Path,
                         title: str = "Metrics") -> Path:
    """One line per metric name, x = step when present else record seq.
    Non-finite values are dropped from the plot (they are audit findings,
    not data)."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    plotted = False
    for name, recs in sorted(records_by_name(records).items()):
        points = [(r.step if r.step is not None else r.seq, r.value)
                  for r in recs if math.isfinite(r.value)]
        if not points:
            continue
        xs, ys = zip(*points)
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=name)
        plotted = True
    ax.set_title(title)
    ax.set_xlabel("step")
    ax.set_ylabel("value")
    if plotted:
        ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
