"""Report figures written straight to files (Agg canvas, no pyplot state)."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.tri import Triangulation

FIGSIZE = (6.0, 4.2)
DPI = 120


def _new_figure():
    fig = Figure(figsize=FIGSIZE, dpi=DPI)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    return path


def plot_solution(mesh, values, path, title="solution"):
    fig, ax = _new_figure()
    values = np.asarray(values, dtype=float)
    if mesh.dim == 1:
        x = mesh.nodes[:, 0]
        ax.plot(x, values, "k.-", lw=1, ms=3)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        tri = Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.elements)
        cs = ax.tricontourf(tri, values, levels=20, cmap="viridis")
        fig.colorbar(cs, ax=ax, label="u")
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(title)
    return _save(fig, path)


def plot_history(report, path):
    """Picard increments (L2, H1 seminorm) against iteration number."""
    fig, ax = _new_figure()
    it = np.arange(1, report.map_applications + 1)
    ax.semilogy(it, np.maximum(report.increments_l2, 1e-300), "ko-", ms=3, label="L2 increment")
    ax.semilogy(it, np.maximum(report.increments_h1, 1e-300), "s--", color="0.5", ms=3, label="H1 increment")
    ax.set_xlabel("iteration")
    ax.set_ylabel("increment")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_convergence(table, path):
    fig, ax = _new_figure()
    h = np.array(table.column("h"))
    for name, style in (("l2_error", "ko-"), ("h1_error", "s-")):
        e = np.array(table.column(name))
        ax.loglog(h, e, style, ms=4, label=name.replace("_", " "))
    # reference slopes anchored at the coarsest level
    for p, ls in ((2, ":"), (1, "--")):
        col = "l2_error" if p == 2 else "h1_error"
        e0 = table.rows[0].__dict__[col]
        ax.loglog(h, e0 * (h / h[0]) ** p, ls, color="0.6", label=f"h^{p}")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_dependence(report, path, xlabel="perturbation size"):
    fig, ax = _new_figure()
    p = np.asarray(report.parameters, dtype=float)
    d = np.asarray(report.distances, dtype=float)
    keep = (p > 0) & (d > 0)
    ax.loglog(p[keep], d[keep], "ko-", ms=4, label=f"{report.kind} (slope {report.slope:.2f})")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("distance")
    ax.legend(frameon=False)
    return _save(fig, path)
