"""Length/area of super-level sets of nodal fields.

2D uses marching squares with linear edge interpolation, evaluated cell by
cell so periodic grids need no contour chaining.  Saddle cells are resolved
with the mean of the four corners.  3D uses marching cubes from scikit-image.
"""

from __future__ import annotations

import numpy as np


def _pad(u: np.ndarray, periodic: bool) -> np.ndarray:
    if periodic:
        # close the torus: append the first slice on every axis
        return np.pad(u, [(0, 1)] * u.ndim, mode="wrap")
    return np.pad(u, 1)


def _tri_area(p, q, r):
    return 0.5 * np.abs((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (r[..., 0] - p[..., 0]) * (q[..., 1] - p[..., 1]))


def _shoelace(points: np.ndarray) -> np.ndarray:
    x, y = points[..., 0], points[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def superlevel_2d(u: np.ndarray, spacing, level: float, periodic: bool = False) -> tuple[float, float]:
    """Return ``(area, boundary length)`` of ``{u > level}`` in 2D."""
    v = _pad(np.asarray(u, dtype=float), periodic)
    hx, hy = float(spacing[0]), float(spacing[1])
    # corners in counterclockwise order in (axis0, axis1) coordinates
    vals = np.stack([v[:-1, :-1], v[1:, :-1], v[1:, 1:], v[:-1, 1:]], axis=-1).reshape(-1, 4)
    above = vals > level
    n_above = above.sum(axis=1)
    full = n_above == 4
    mixed = (n_above > 0) & ~full
    vals, above = vals[mixed], above[mixed]
    corners = np.array([[0.0, 0.0], [hx, 0.0], [hx, hy], [0.0, hy]])

    nxt = np.roll(vals, -1, axis=1)
    crosses = above != np.roll(above, -1, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(crosses, (level - vals) / (nxt - vals), 0.0)
    start = corners[None, :, :]
    stop = np.roll(corners, -1, axis=0)[None, :, :]
    xpts = start + t[..., None] * (stop - start)  # crossing on edge e: corner e -> e+1

    # polygon of the above-region: corners and crossings interleaved, with
    # missing entries replaced by the previous valid point (zero-area padding)
    seq = np.empty((vals.shape[0], 8, 2))
    valid = np.empty((vals.shape[0], 8), dtype=bool)
    seq[:, 0::2] = corners[None]
    seq[:, 1::2] = xpts
    valid[:, 0::2] = above
    valid[:, 1::2] = crosses
    filled = seq.copy()
    last = np.full((vals.shape[0], 2), np.nan)
    for _ in range(2):
        for i in range(8):
            last = np.where(valid[:, i, None], seq[:, i], last)
            filled[:, i] = last
    area_poly = np.abs(_shoelace(filled))

    n_cross = crosses.sum(axis=1)
    length = np.zeros(vals.shape[0])
    two = n_cross == 2
    for e1 in range(4):
        for e2 in range(e1 + 1, 4):
            sel = two & crosses[:, e1] & crosses[:, e2]
            length[sel] = np.linalg.norm(xpts[sel, e1] - xpts[sel, e2], axis=1)

    saddle = n_cross == 4
    area = area_poly
    if np.any(saddle):
        sv, sa, sx = vals[saddle], above[saddle], xpts[saddle]
        connected_above = sv.mean(axis=1) > level
        # each corner is cut off by the segment joining the crossings on its
        # incoming edge (e-1) and outgoing edge (e)
        cut_len = np.stack([np.linalg.norm(sx[:, e] - sx[:, e - 1], axis=1) for e in range(4)], axis=1)
        tri = np.stack(
            [_tri_area(np.broadcast_to(corners[e], sx[:, e].shape), sx[:, e], sx[:, e - 1]) for e in range(4)],
            axis=1,
        )
        cut_below = np.where(~sa, cut_len, 0.0).sum(axis=1)
        cut_above = np.where(sa, cut_len, 0.0).sum(axis=1)
        tri_below = np.where(~sa, tri, 0.0).sum(axis=1)
        tri_above = np.where(sa, tri, 0.0).sum(axis=1)
        length[saddle] = np.where(connected_above, cut_below, cut_above)
        area = area.copy()
        area[saddle] = np.where(connected_above, hx * hy - tri_below, tri_above)

    total_area = float(full.sum()) * hx * hy + float(area.sum())
    return total_area, float(length.sum())


def superlevel_2d_clipped(u: np.ndarray, spacing, origin, level: float, outline: np.ndarray) -> tuple[float, float]:
    """``(area, perimeter)`` of ``{u > level}`` intersected with a polygonal domain.

    Nodes outside the domain carry zero, so a contour hugging the wall follows
    the staircase of the node mask; clipping by the true boundary removes it.
    """
    import shapely
    from skimage.measure import find_contours

    v = _pad(np.asarray(u, dtype=float), False)
    if v.max() <= level:
        return 0.0, 0.0
    h = np.asarray(spacing, dtype=float)
    o = np.asarray(origin, dtype=float)
    region = shapely.Polygon()
    for c in find_contours(v, level):
        if len(c) < 4:
            continue
        ring = shapely.make_valid(shapely.Polygon(o + (c - 1.0) * h))
        # even-odd composition turns enclosed rings into holes
        region = region.symmetric_difference(ring)
    region = region.intersection(shapely.make_valid(shapely.Polygon(outline)))
    return float(region.area), float(region.length)


def superlevel_3d(u: np.ndarray, spacing, level: float, periodic: bool = False) -> tuple[float, float]:
    """Return ``(volume, surface area)`` of ``{u > level}`` in 3D."""
    from skimage.measure import marching_cubes, mesh_surface_area

    if periodic:
        raise NotImplementedError("periodic 3D level-set measurement is not supported")
    v = _pad(np.asarray(u, dtype=float), False)
    if v.max() <= level:
        return 0.0, 0.0
    verts, faces, _, _ = marching_cubes(v, level=level, spacing=tuple(float(s) for s in spacing))
    surface = float(mesh_surface_area(verts, faces))
    tri = verts[faces]
    volume = abs(float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum()) / 6.0)
    return volume, surface


def superlevel(u: np.ndarray, spacing, level: float, periodic: bool = False) -> tuple[float, float]:
    if u.ndim == 2:
        return superlevel_2d(u, spacing, level, periodic)
    return superlevel_3d(u, spacing, level, periodic)
