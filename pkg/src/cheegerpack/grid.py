"""Uniform finite-difference grids, domain masks and quadrature.

Fields are plain numpy arrays shaped like ``GridSpec.shape``.  Integrals use
the arithmetic-mean rule (box volume times the nodal mean).  The gradient
term is built from differences across grid edges, with zero ghost nodes
beyond a non-periodic box and wrap-around on a periodic one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .domains import Shape


class GridError(ValueError):
    """Shape or dimension mismatch between a field and its grid."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    m: int
    lengths: tuple[float, ...]
    origin: tuple[float, ...] | None = None
    periodic: bool = False

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {self.dim}")
        if self.m < 4:
            raise GridError(f"need at least 4 nodes per axis, got {self.m}")
        lengths = tuple(float(x) for x in self.lengths)
        if len(lengths) != self.dim or min(lengths) <= 0:
            raise GridError("lengths must be positive, one per axis")
        object.__setattr__(self, "lengths", lengths)
        origin = (0.0,) * self.dim if self.origin is None else tuple(float(x) for x in self.origin)
        if len(origin) != self.dim:
            raise GridError("origin must have one entry per axis")
        object.__setattr__(self, "origin", origin)

    @classmethod
    def for_shape(cls, shape: Shape, m: int, periodic: bool = False) -> "GridSpec":
        lo, hi = shape.bounds()
        return cls(shape.dim, m, tuple(hi - lo), tuple(lo), periodic)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.m**self.dim

    @property
    def spacing(self) -> np.ndarray:
        # periodic nodes sit at i*L/m so the wrap edge has the same length
        denom = self.m if self.periodic else self.m - 1
        return np.asarray(self.lengths) / denom

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell_weight(self) -> float:
        """Quadrature weight of a single node."""
        return self.volume / self.n_nodes

    def axes(self) -> list[np.ndarray]:
        h = self.spacing
        return [self.origin[a] + h[a] * np.arange(self.m) for a in range(self.dim)]

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(*self.shape, dim)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def refined(self) -> "GridSpec":
        # doubling the number of intervals keeps coarse nodes on the fine grid
        m = 2 * self.m if self.periodic else 2 * self.m - 1
        return GridSpec(self.dim, m, self.lengths, self.origin, self.periodic)

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            if f.size == self.n_nodes and f.ndim == 1:
                return f.reshape(self.shape)
            raise GridError(f"field shape {f.shape} does not match grid {self.shape}")
        return f


@dataclass
class DomainMask:
    inside: np.ndarray
    shape: Shape

    @classmethod
    def build(cls, grid: GridSpec, shape: Shape) -> "DomainMask":
        if shape.dim != grid.dim:
            raise GridError(f"{shape.dim}-D shape on a {grid.dim}-D grid")
        if shape.is_full_box and np.allclose(shape.bounds()[0], grid.origin) and np.allclose(
            shape.bounds()[1], np.asarray(grid.origin) + grid.lengths
        ):
            return cls(np.ones(grid.shape, dtype=bool), shape)
        pts = grid.coordinates().reshape(-1, grid.dim)
        # nodes on the boundary are outside: u vanishes on the boundary itself
        tol = 1e-9 * float(grid.spacing.min())
        inside = shape.contains(pts, tol=tol).reshape(grid.shape)
        return cls(inside, shape)

    @property
    def count(self) -> int:
        return int(self.inside.sum())


@dataclass
class PhaseSystem:
    grid: GridSpec
    mask: DomainMask
    phases: np.ndarray

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        if self.phases.ndim == self.grid.dim:
            self.phases = self.phases[None]
        if self.phases.shape[1:] != self.grid.shape:
            raise GridError(f"phases shape {self.phases.shape} does not match grid {self.grid.shape}")
        if self.mask.inside.shape != self.grid.shape:
            raise GridError("mask does not match grid")

    @property
    def k(self) -> int:
        return self.phases.shape[0]

    def validate(self, atol: float = 0.0) -> None:
        u = self.phases
        if not np.all(np.isfinite(u)):
            raise GridError("phases contain non-finite values")
        if u.min() < -atol or u.max() > 1 + atol:
            raise GridError("phases leave the [0, 1] range")
        if np.any(u[:, ~self.mask.inside] != 0):
            raise GridError("phases are nonzero outside the domain")

    def copy(self) -> "PhaseSystem":
        return PhaseSystem(self.grid, self.mask, self.phases.copy())


def _masked(f: np.ndarray, grid: GridSpec, mask: DomainMask | None) -> np.ndarray:
    f = grid.check(f)
    if mask is None:
        return f
    return np.where(mask.inside, f, 0.0)


def integrate(f, grid: GridSpec, mask: DomainMask | None = None) -> float:
    return grid.cell_weight * float(_masked(f, grid, mask).sum())


def lp_power(f, q: float, grid: GridSpec, mask: DomainMask | None = None) -> float:
    """Quadrature of ``|f|**q``."""
    if q <= 1:
        raise GridError(f"exponent must exceed 1, got {q}")
    return grid.cell_weight * float(np.sum(np.abs(_masked(f, grid, mask)) ** q))


def edge_differences(f: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return np.roll(f, -1, axis=axis) - f
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    return np.diff(np.pad(f, pad), axis=axis)


def gradient_energy(f, grid: GridSpec, mask: DomainMask | None = None) -> float:
    """Discrete Dirichlet energy: quadrature of ``|grad f|**2``."""
    f = _masked(f, grid, mask)
    h = grid.spacing
    total = 0.0
    for a in range(grid.dim):
        d = edge_differences(f, a, grid.periodic)
        total += float(np.sum(d * d)) / h[a] ** 2
    return grid.cell_weight * total


def neg_laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Sum over axes of ``(2f - f_next - f_prev)/h**2`` with the grid's ghost rule.

    ``d gradient_energy / d f = 2 * cell_weight * neg_laplacian(f)``.
    """
    h = grid.spacing
    out = np.zeros_like(f)
    for a in range(grid.dim):
        if grid.periodic:
            lap = 2 * f - np.roll(f, 1, axis=a) - np.roll(f, -1, axis=a)
        else:
            d = edge_differences(f, a, False)
            lap = -np.diff(d, axis=a)
        out += lap / h[a] ** 2
    return out


def refine(f, grid: GridSpec, shape: Shape | None = None) -> np.ndarray:
    """Multilinear interpolation of ``f`` onto ``grid.refined()``.

    When ``shape`` is given the mask is rebuilt on the fine grid and applied.
    """
    f = grid.check(f)
    out = f
    for a in range(grid.dim):
        out = _refine_axis(out, a, grid.periodic)
    if shape is not None:
        fine = grid.refined()
        out = np.where(DomainMask.build(fine, shape).inside, out, 0.0)
    return out


def _refine_axis(f: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    m = f.shape[0]
    n = 2 * m if periodic else 2 * m - 1
    out = np.empty((n,) + f.shape[1:])
    out[0::2] = f
    nxt = np.roll(f, -1, axis=0) if periodic else f[1:]
    out[1::2] = 0.5 * ((f if periodic else f[:-1]) + nxt)
    return np.moveaxis(out, 0, axis)


def restrict(f: np.ndarray, coarse: GridSpec) -> np.ndarray:
    """Sample a field on ``coarse.refined()`` back at the coarse nodes."""
    sl = (slice(0, None, 2),) * coarse.dim
    return np.asarray(f)[sl]
