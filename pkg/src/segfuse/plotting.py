"""SVG figures for reports.

Figures are built on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state), and saved with a fixed hash salt and no date stamp so that
identical inputs give byte-identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.colors import TwoSlopeNorm
from matplotlib.figure import Figure

from .errors import IoFailure

STYLE = {
    "svg.hashsalt": "segfuse",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
}

GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def new_figure(width=5.0, height=None, ncols=1):
    """Figure with ``ncols`` side-by-side axes; height defaults to the golden ratio."""
    with matplotlib.rc_context(STYLE):
        if height is None:
            height = width * GOLDEN
        fig = Figure(figsize=(width * ncols, height))
        FigureCanvasAgg(fig)
        axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, list(axes)


def save_figure(fig, path) -> None:
    try:
        with matplotlib.rc_context(STYLE):
            fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _style_axes(ax, xlabel, ylabel, xlim=None, ylim=None):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if xlim is not None:
        ax.set_xlim(*xlim)
    if ylim is not None:
        ax.set_ylim(*ylim)


def _finish_legend(ax, labels):
    if any(labels):
        ax.legend(loc="best", frameon=False)


def save_pr_curves(curves: dict, path) -> None:
    """Precision against recall; ``curves`` maps a legend label to curve points."""
    fig, (ax,) = new_figure()
    for label, points in curves.items():
        pts = sorted(points, key=lambda p: (p.x, -p.y))
        ax.step([p.x for p in pts], [p.y for p in pts], where="post", label=label or None)
    _style_axes(ax, "Recall", "Precision", (0.0, 1.02), (0.0, 1.02))
    _finish_legend(ax, list(curves))
    save_figure(fig, path)


def save_mr_fppi_curves(curves: dict, path) -> None:
    """Miss rate against false positives per image."""
    fig, (ax,) = new_figure()
    for label, points in curves.items():
        pts = sorted(points, key=lambda p: (p.x, p.y))
        ax.plot([p.x for p in pts], [p.y for p in pts], marker=".", label=label or None)
    _style_axes(ax, "False positives per image", "Miss rate", ylim=(0.0, 1.02))
    ax.set_xlim(left=0.0)
    _finish_legend(ax, list(curves))
    save_figure(fig, path)


def save_sweep_plots(table, path, selected=None) -> None:
    """Precision vs c, recall vs c, and precision vs recall across c."""
    rows = table.rows
    c = [r.c for r in rows]
    precision = [r.precision for r in rows]
    recall = [r.recall for r in rows]
    fig, (ax_p, ax_r, ax_pr) = new_figure(width=4.0, ncols=3)
    ax_p.plot(c, precision, marker=".")
    _style_axes(ax_p, "c", "Precision", ylim=(0.0, 1.02))
    ax_r.plot(c, recall, marker=".")
    _style_axes(ax_r, "c", "Recall", ylim=(0.0, 1.02))
    ax_pr.plot(recall, precision, marker=".")
    _style_axes(ax_pr, "Recall", "Precision", (0.0, 1.02), (0.0, 1.02))
    if selected is not None:
        for r in rows:
            if r.c == selected:
                ax_p.axvline(selected, color="k", ls="--", lw=0.8)
                ax_r.axvline(selected, color="k", ls="--", lw=0.8)
                ax_pr.plot([r.recall], [r.precision], "ko", ms=5)
                ax_pr.annotate(f"c={selected:g}", (r.recall, r.precision),
                               textcoords="offset points", xytext=(-40, -14))
                break
    fig.tight_layout()
    save_figure(fig, path)


def save_heatmap(heatmap, path, title=None) -> None:
    """Diverging colour scale centred at zero; absent positions are left grey."""
    values = np.ma.masked_invalid(heatmap.values)
    finite = values.compressed()
    span = float(np.max(np.abs(finite))) if finite.size else 0.0
    if span == 0.0:
        span = 1.0
    fig, (ax,) = new_figure(width=6.0, height=6.0 * heatmap.grid_height / max(heatmap.grid_width, 1) + 0.8)
    ax.grid(False)
    ax.set_facecolor("0.8")
    image = ax.imshow(values, cmap="RdBu_r", norm=TwoSlopeNorm(vcenter=0.0, vmin=-span, vmax=span),
                      interpolation="nearest", origin="upper")
    fig.colorbar(image, ax=ax, label="Score change vs. baseline")
    ax.set_xlabel("Window column")
    ax.set_ylabel("Window row")
    if title:
        ax.set_title(title)
    save_figure(fig, path)
