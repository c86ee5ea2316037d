"""
SVG figures for the report: front scatter and profit rings
"""

import io
from typing import Dict, Mapping, Sequence

import matplotlib  # type: ignore[import]

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # type: ignore[import]  # noqa: E402

# fixed ids and no timestamp, so the same data gives the same file
matplotlib.rcParams["svg.hashsalt"] = "pdscr"
matplotlib.rcParams["svg.fonttype"] = "none"


def _svg(fig: "plt.Figure") -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def front_svg(
    fronts: Mapping[str, Sequence[Sequence[float]]],
    xlabel: str = "J1 total fuel cost ($)",
    ylabel: str = "J2 = 1 - ASC",
    title: str = "Pareto front",
) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, points in fronts.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker="o", linestyle="--", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True)
    if len(fronts) > 1:
        ax.legend()
    return _svg(fig)


def profit_ring_svg(shares: Mapping[str, Dict[str, float]]) -> str:
    """One donut per criterion showing how the cooperative profit was split"""
    n = max(len(shares), 1)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 4), squeeze=False)
    for ax, (criterion, split) in zip(axes[0], shares.items()):
        labels = [k for k, v in split.items() if v > 0]
        values = [split[k] for k in labels]
        if values:
            ax.pie(values, labels=labels, autopct="%1.1f%%", wedgeprops={"width": 0.4})
        else:
            ax.text(0.5, 0.5, "no cooperative profit", ha="center", va="center")
        ax.set_title(criterion)
        ax.axis("equal")
    return _svg(fig)
