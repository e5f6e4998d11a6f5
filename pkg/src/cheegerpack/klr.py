"""Exact Cheeger sets of convex polygons and alpha-Cheeger constants of balls.

The Cheeger set of a convex planar body K is the inner parallel body
``K_{-t}`` dilated by a disk of radius ``t``, where ``t`` is the root of
``|K_{-t}| = pi t^2``; the Cheeger constant is ``1/t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import Ball, DomainError, Polygon, unit_ball_volume
from .functional import SharpMeasurement


class OracleError(ValueError):
    pass


class ConvexPolygon(Polygon):
    """Strictly convex polygon with counterclockwise vertices."""

    def __init__(self, vertices):
        try:
            super().__init__(vertices)
        except DomainError as exc:
            raise OracleError(str(exc)) from None
        if not self.is_convex():
            raise OracleError("polygon is not strictly convex")

    @property
    def area(self) -> float:
        return self.volume()

    @property
    def perimeter(self) -> float:
        a, b = self.edges
        return float(np.linalg.norm(b - a, axis=1).sum())

    def scaled(self, factor: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices * factor)


def polygonize(shape, n: int = 256) -> ConvexPolygon:
    """Convex polygon stand-in for a curved body: an inscribed regular n-gon of a disk."""
    if isinstance(shape, ConvexPolygon):
        return shape
    if isinstance(shape, Polygon):
        return ConvexPolygon(shape.vertices)
    if isinstance(shape, Ball) and shape.dim == 2:
        ang = 2 * np.pi * np.arange(n) / n
        return ConvexPolygon(shape.center + shape.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1))
    raise OracleError(f"no convex polygon for a {shape.kind} domain")


def polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon where ``normal.x + offset >= 0``."""
    if len(poly) == 0:
        return poly
    vals = poly @ normal + offset
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp, fq = vals[i], vals[(i + 1) % n]
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            out.append(p + (fp / (fp - fq)) * (q - p))
    return np.array(out).reshape(-1, 2)


def _dedupe(v: np.ndarray, tol: float) -> np.ndarray:
    if len(v) == 0:
        return v
    keep = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > tol
    return v[keep]


def inner_parallel_vertices(P: ConvexPolygon, t: float) -> np.ndarray:
    if t < 0:
        raise OracleError("offset distance must be nonnegative")
    normals, offsets = P.halfspaces()
    poly = P.vertices.copy()
    for n, b in zip(normals, offsets):
        poly = _clip(poly, n, b - t)
        if len(poly) == 0:
            break
    scale = float(np.ptp(P.vertices, axis=0).max())
    return _dedupe(poly, 1e-14 * scale)


def inner_parallel(P: ConvexPolygon, t: float) -> ConvexPolygon | None:
    """Points of P at distance >= t from its boundary, or None when empty."""
    v = inner_parallel_vertices(P, t)
    if len(v) < 3 or polygon_area(v) <= 0:
        return None
    try:
        return ConvexPolygon(v)
    except OracleError:
        # nearly collinear leftovers of vanished edges
        return ConvexPolygon(_drop_collinear(v))


def _drop_collinear(v: np.ndarray) -> np.ndarray:
    e1 = np.roll(v, -1, axis=0) - v
    e0 = v - np.roll(v, 1, axis=0)
    cross = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]
    scale = np.linalg.norm(e0, axis=1) * np.linalg.norm(e1, axis=1)
    return v[cross > 1e-12 * scale]


def inner_area(P: ConvexPolygon, t: float) -> float:
    v = inner_parallel_vertices(P, t)
    return polygon_area(v) if len(v) >= 3 else 0.0


def inradius(P: ConvexPolygon) -> tuple[float, np.ndarray]:
    """Largest inscribed disk (radius, center) by linear programming."""
    from scipy.optimize import linprog

    normals, offsets = P.halfspaces()
    # maximize r  s.t.  n.x + b >= r
    A = np.hstack([-normals, np.ones((len(normals), 1))])
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=offsets, bounds=[(None, None)] * 3, method="highs")
    if not res.success:
        raise OracleError(f"inradius LP failed: {res.message}")
    return float(res.x[2]), res.x[:2]


@dataclass
class CheegerExact:
    t_star: float
    h: float
    inner_polygon: ConvexPolygon
    segments: list[tuple[np.ndarray, np.ndarray]]
    arcs: list[tuple[np.ndarray, float, float]]  # center, start angle, sweep

    @property
    def perimeter(self) -> float:
        seg = sum(float(np.linalg.norm(b - a)) for a, b in self.segments)
        return seg + self.t_star * sum(sweep for _, _, sweep in self.arcs)

    @property
    def area(self) -> float:
        inner = self.inner_polygon
        return inner.area + inner.perimeter * self.t_star + math.pi * self.t_star**2

    def boundary_polyline(self, points_per_arc: int = 32) -> np.ndarray:
        """Closed polyline tracing segments and arcs in order."""
        out = []
        for (a, b), (center, start, sweep) in zip(self.segments, self.arcs):
            out.append(a)
            out.append(b)
            ang = start + sweep * np.linspace(0, 1, points_per_arc + 2)[1:-1]
            out.extend(center + self.t_star * np.stack([np.cos(ang), np.sin(ang)], axis=1))
        out.append(out[0])
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "h": self.h,
            "inner_vertices": self.inner_polygon.vertices.tolist(),
            "segments": [[a.tolist(), b.tolist()] for a, b in self.segments],
            "arcs": [
                {"center": c.tolist(), "radius": self.t_star, "start": s, "sweep": w} for c, s, w in self.arcs
            ],
        }


def cheeger_exact(P: ConvexPolygon, xtol: float = 1e-15) -> CheegerExact:
    if not isinstance(P, ConvexPolygon):
        P = ConvexPolygon(np.asarray(P, dtype=float))
    if P.area <= 0:
        raise OracleError("degenerate polygon")
    r_in, _ = inradius(P)
    lo, hi = 0.0, r_in
    # A(t) - pi t^2 is positive at 0 and negative at the inradius
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if inner_area(P, mid) - math.pi * mid * mid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol * r_in:
            break
    t = 0.5 * (lo + hi)
    inner = inner_parallel(P, t)
    if inner is None:
        raise OracleError("inner parallel body vanished at the root")
    v = inner.vertices
    nxt = np.roll(v, -1, axis=0)
    e = nxt - v
    normals = np.stack([e[:, 1], -e[:, 0]], axis=1) / np.linalg.norm(e, axis=1, keepdims=True)
    segments = [(v[i] + t * normals[i], nxt[i] + t * normals[i]) for i in range(len(v))]
    arcs = []
    for i in range(len(v)):
        j = (i + 1) % len(v)
        a0 = math.atan2(normals[i, 1], normals[i, 0])
        a1 = math.atan2(normals[j, 1], normals[j, 0])
        arcs.append((nxt[i].copy(), a0, (a1 - a0) % (2 * math.pi)))
    return CheegerExact(t, 1.0 / t, inner, segments, arcs)


def omega(dim: int) -> float:
    """Isoperimetric constant ``P(B)/|B|^((N-1)/N)`` of the unit ball."""
    g = unit_ball_volume(dim)
    return dim * g ** (1.0 / dim)


def analytic_alpha_cheeger_ball(dim: int, radius: float, alpha: float) -> float:
    crit = (dim - 1) / dim
    if not alpha > crit:
        raise OracleError(f"alpha must exceed (N-1)/N = {crit:.6g}")
    g = unit_ball_volume(dim)
    return dim * g * radius ** (dim - 1) / (g * radius**dim) ** alpha


def compare(measured: SharpMeasurement | float, exact: CheegerExact | float) -> float:
    """Relative error ``|h_measured - h_exact| / h_exact``."""
    if isinstance(measured, SharpMeasurement):
        if len(measured.per_phase_h_alpha) != 1:
            raise OracleError("comparison needs a single-phase measurement")
        if measured.empty:
            raise OracleError("measurement is empty")
        measured = measured.per_phase_h_alpha[0]
    h_exact = exact.h if isinstance(exact, CheegerExact) else float(exact)
    return abs(float(measured) - h_exact) / h_exact
