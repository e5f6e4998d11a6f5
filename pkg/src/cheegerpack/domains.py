"""Shape descriptors for computational domains.

Every shape knows its bounding box, a vectorized inside test and a signed
distance to its boundary (positive inside).  Convex polytopes additionally
expose their supporting halfspaces, which the packing refiner uses as exact
linear wall constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DomainError(ValueError):
    """Raised for malformed shape descriptors."""


class Shape:
    dim: int
    kind: str = "shape"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.signed_distance(points) > tol

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Inward unit normals ``n`` and offsets ``b`` with ``n.x + b >= 0`` inside."""
        return None

    def volume(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def is_full_box(self) -> bool:
        return False

    def outline(self, n: int = 4096) -> np.ndarray | None:
        """Closed boundary polyline of a planar shape (None when unknown)."""
        return None


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got {pts.shape[-1]}")
    return pts


@dataclass
class Rectangle(Shape):
    """Axis-aligned box; used as the grid box itself, so every node is inside."""

    lower: np.ndarray
    upper: np.ndarray
    kind: str = field(default="rectangle", init=False)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise DomainError("rectangle bounds must be 1-D arrays of equal length")
        if np.any(self.upper <= self.lower):
            raise DomainError("rectangle must have positive extent on every axis")
        self.dim = self.lower.size

    @property
    def is_full_box(self) -> bool:
        return True

    def bounds(self):
        return self.lower.copy(), self.upper.copy()

    def signed_distance(self, points):
        pts = _as_points(points, self.dim)
        return np.min(np.concatenate([pts - self.lower, self.upper - pts], axis=-1), axis=-1)

    def halfspaces(self):
        eye = np.eye(self.dim)
        normals = np.concatenate([eye, -eye])
        offsets = np.concatenate([-self.lower, self.upper])
        return normals, offsets

    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def to_dict(self):
        return {"type": "rectangle", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to each segment; shape (npts, nseg)."""
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("pij,ij->pi", ap, ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=-1)


@dataclass
class Polygon(Shape):
    """Simple polygon in the plane (convex or not), counterclockwise vertices."""

    vertices: np.ndarray
    kind: str = field(default="polygon", init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise DomainError("polygon needs at least 3 two-dimensional vertices")
        if _shoelace(v) < 0:
            v = v[::-1].copy()
        if _shoelace(v) <= 0:
            raise DomainError("polygon has zero area")
        self.vertices = v
        self.dim = 2

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def outline(self, n: int = 4096) -> np.ndarray:
        return self.vertices

    def is_convex(self) -> bool:
        a, b = self.edges
        e1 = b - a
        e2 = np.roll(e1, -1, axis=0)
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        return bool(np.all(cross > 0))

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def _inside(self, pts: np.ndarray) -> np.ndarray:
        # crossing-number test
        x, y = pts[:, 0:1], pts[:, 1:2]
        a, b = self.edges
        xa, ya, xb, yb = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
        straddle = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = xa + (y - ya) * (xb - xa) / (yb - ya)
        hits = straddle & (x < xcross)
        return (np.count_nonzero(hits, axis=1) % 2) == 1

    def signed_distance(self, points):
        pts = _as_points(points, 2)
        a, b = self.edges
        dist = _segment_distance(pts, a, b).min(axis=1)
        return np.where(self._inside(pts), dist, -dist)

    def halfspaces(self):
        if not self.is_convex():
            return None
        a, b = self.edges
        e = b - a
        normals = np.stack([-e[:, 1], e[:, 0]], axis=1)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        offsets = -np.einsum("ij,ij->i", normals, a)
        return normals, offsets

    def volume(self):
        return _shoelace(self.vertices)

    def to_dict(self):
        return {"type": "polygon", "vertices": self.vertices.tolist()}


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass
class Ball(Shape):
    center: np.ndarray
    radius: float
    kind: str = field(default="ball", init=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise DomainError("ball radius must be positive")
        self.dim = self.center.size

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def outline(self, n: int = 4096) -> np.ndarray | None:
        if self.dim != 2:
            return None
        # circumscribed polygon: same perimeter error as the inscribed one, opposite sign
        t = 2 * np.pi * np.arange(n) / n
        r = self.radius / np.sqrt(np.cos(np.pi / n))
        return self.center + r * np.stack([np.cos(t), np.sin(t)], axis=1)

    def signed_distance(self, points):
        pts = _as_points(points, self.dim)
        return self.radius - np.linalg.norm(pts - self.center, axis=-1)

    def volume(self):
        return unit_ball_volume(self.dim) * self.radius**self.dim

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass
class Polytope(Shape):
    """Convex polytope given by its vertices (hull computed on construction)."""

    vertices: np.ndarray
    kind: str = field(default="polytope", init=False)

    def __post_init__(self):
        from scipy.spatial import ConvexHull

        v = np.asarray(self.vertices, dtype=float)
        self.dim = v.shape[1]
        hull = ConvexHull(v)
        # qhull equations are outward: n.x + c <= 0 inside
        eq = np.unique(np.round(hull.equations, 12), axis=0)
        self._normals = -eq[:, :-1]
        self._offsets = -eq[:, -1]
        self._volume = float(hull.volume)
        self.vertices = v

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def signed_distance(self, points):
        # exact for interior points; a lower bound outside
        pts = _as_points(points, self.dim)
        return np.min(pts @ self._normals.T + self._offsets, axis=-1)

    def halfspaces(self):
        return self._normals.copy(), self._offsets.copy()

    def volume(self):
        return self._volume

    def to_dict(self):
        return {"type": "polytope", "vertices": self.vertices.tolist()}


@dataclass
class Implicit(Shape):
    """Domain ``{x : func(x) > 0}`` inside an explicit bounding box.

    ``func`` must accept an (n, dim) array.  Only the sign is used for masks;
    packing needs a true signed distance, which is the caller's business.
    """

    func: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    kind: str = field(default="implicit", init=False)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.dim = self.lower.size

    def bounds(self):
        return self.lower.copy(), self.upper.copy()

    def signed_distance(self, points):
        return np.asarray(self.func(_as_points(points, self.dim)), dtype=float)

    def volume(self):
        raise DomainError("implicit domains have no closed-form volume")

    def to_dict(self):
        raise DomainError("implicit domains cannot be serialized")


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def square(side: float = 1.0, origin=(0.0, 0.0)) -> Polygon:
    x0, y0 = origin
    return Polygon([[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]])


def equilateral_triangle(side: float = 1.0) -> Polygon:
    return Polygon([[0.0, 0.0], [side, 0.0], [side / 2, side * math.sqrt(3) / 2]])


def regular_tetrahedron(edge: float = 1.0) -> Polytope:
    a = edge
    return Polytope(
        [
            [0.0, 0.0, 0.0],
            [a, 0.0, 0.0],
            [a / 2, a * math.sqrt(3) / 2, 0.0],
            [a / 2, a * math.sqrt(3) / 6, a * math.sqrt(2.0 / 3.0)],
        ]
    )


def shape_from_dict(spec: dict) -> Shape:
    """Build a shape from its JSON descriptor."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise DomainError("domain descriptor must be an object with a 'type' key")
    kind = spec["type"]
    try:
        if kind == "rectangle":
            return Rectangle(spec["lower"], spec["upper"])
        if kind == "box":
            n = int(spec.get("dim", 2))
            return Rectangle(np.zeros(n), np.full(n, float(spec.get("side", 1.0))))
        if kind == "cube":
            return Rectangle(np.zeros(3), np.full(3, float(spec.get("side", 1.0))))
        if kind == "polygon":
            return Polygon(spec["vertices"])
        if kind == "square":
            return square(float(spec.get("side", 1.0)))
        if kind == "equilateral_triangle":
            return equilateral_triangle(float(spec.get("side", 1.0)))
        if kind in ("ball", "disk"):
            return Ball(spec["center"], float(spec["radius"]))
        if kind == "tetrahedron":
            return regular_tetrahedron(float(spec.get("edge", 1.0)))
        if kind == "polytope":
            return Polytope(spec["vertices"])
    except KeyError as exc:
        raise DomainError(f"domain '{kind}' is missing key {exc}") from None
    raise DomainError(f"unknown domain type '{kind}'")
