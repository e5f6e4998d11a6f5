"""Matplotlib figures for run reports (Agg backend, PNG files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Polygon as PolygonPatch  # noqa: E402

from .grid import PhaseSystem  # noqa: E402


def _domain_patch(domain, **kw):
    if domain.kind == "ball":
        return Circle(domain.center[:2], domain.radius, **kw)
    if domain.kind == "rectangle":
        lo, hi = domain.bounds()
        verts = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    else:
        verts = domain.outline()
        if verts is None:
            return None
    return PolygonPatch(verts, closed=True, **kw)


def plot_phases(sys: PhaseSystem, path, level: float = 0.5, title: str | None = None, overlay=None) -> None:
    """Max-over-phases density with each phase's level-set contour.

    ``overlay`` is an optional closed polyline (n, 2) drawn dashed on top.
    3-D systems are shown through their middle slice.
    """
    phases = sys.phases
    grid = sys.grid
    if grid.dim == 3:
        phases = phases[:, :, :, grid.m // 2]
    xs, ys = grid.axes()[:2]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(
        phases.max(axis=0).T,
        origin="lower",
        extent=(xs[0], xs[-1], ys[0], ys[-1]),
        cmap="Greys",
        vmin=0,
        vmax=1,
    )
    colors = plt.cm.tab10(np.arange(len(phases)) % 10)
    for u, col in zip(phases, colors):
        if u.max() > level:
            ax.contour(xs, ys, u.T, levels=[level], colors=[col], linewidths=1.2)
    if overlay is not None:
        ax.plot(overlay[:, 0], overlay[:, 1], "b--", linewidth=1.0)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_trace(stages, path) -> None:
    """Objective value against cumulative iteration, one color per stage."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    offset = 0
    for i, st in enumerate(stages):
        tr = np.asarray(st.report.value_trace, dtype=float)
        it = offset + np.arange(len(tr))
        ax.plot(it, tr, label=f"m={st.m}, eps={st.eps:.3g}")
        offset += len(tr)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    if all(np.min(st.report.value_trace) > 0 for st in stages):
        ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_packing(result, path) -> None:
    cfg = result.config
    fig, ax = plt.subplots(figsize=(5, 5))
    patch = _domain_patch(cfg.domain, fill=False, edgecolor="black") if cfg.dim == 2 else None
    if patch is not None:
        ax.add_patch(patch)
    for c, r in zip(cfg.centers, cfg.radii):
        ax.add_patch(Circle(c[:2], r, fill=False, edgecolor="red"))
    lo, hi = cfg.domain.bounds()
    pad = 0.02 * float(np.max(hi - lo))
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_aspect("equal")
    ax.set_title(f"{result.objective}: {result.value:.8g}")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_surface(u: np.ndarray, spacing, level: float, path) -> None:
    """Marching-cubes surface of a 3-D level set."""
    from mpl_toolkits.mplot3d.art3d import Poly3DCollection
    from skimage.measure import marching_cubes

    v = np.pad(u, 1)
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="3d")
    if v.max() > level:
        verts, faces, _, _ = marching_cubes(v, level=level, spacing=tuple(float(s) for s in spacing))
        ax.add_collection3d(Poly3DCollection(verts[faces], alpha=0.6, edgecolor="none", facecolor="tab:blue"))
        ext = np.asarray(spacing) * np.array(v.shape)
        ax.set_xlim(0, ext[0])
        ax.set_ylim(0, ext[1])
        ax.set_zlim(0, ext[2])
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
