"""Figures for evaluation reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import EvalReport  # noqa: E402

METRICS = ("TA", "AA", "CB", "CC")
COLORS = ("#4c72b0", "#55a868", "#c44e52", "#8172b2")


def plot_report(report: EvalReport, path, title: str | None = None, dpi: int = 150):
    """Grouped bars, one group per task row plus the average; missing cells are left empty."""
    rows = [(k.short_name, row) for k, row in report.per_task.items()]
    rows.append(("Avg.", report.aggregate))
    width = 0.8 / len(METRICS)

    fig, ax = plt.subplots(figsize=(7.5, 3.6))
    for j, (metric, color) in enumerate(zip(METRICS, COLORS)):
        xs, ys = [], []
        for i, (_, row) in enumerate(rows):
            value = getattr(row, metric)
            if value is not None:
                xs.append(i + (j - 1.5) * width)
                ys.append(value)
        ax.bar(xs, ys, width=width, color=color, label=metric)

    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([name for name, _ in rows])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.axvline(len(rows) - 1.5, color="0.6", lw=0.8, ls="--")
    ax.legend(ncol=4, loc="lower center", bbox_to_anchor=(0.5, 1.0), frameon=False)
    if title:
        ax.set_title(title, pad=28)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata={"Software": None})
    plt.close(fig)
    return path
