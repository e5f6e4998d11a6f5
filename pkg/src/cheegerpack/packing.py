"""Explicit ball packings from phase-field cells.

Centers are read off the phase densities, then polished by sequential linear
programming with a trust region: pair distances are linearized (which is
conservative, since a distance is convex in the displacement), flat walls
are exact, and curved walls are linearized and repaired afterwards.  When the
linear model stops producing progress a coordinate pattern search takes over.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .domains import Ball, Shape, shape_from_dict
from .grid import PhaseSystem

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
ACTIVE_TOL = 1e-7
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class PackingError(ValueError):
    pass


class ExtractionError(PackingError):
    def __init__(self, phase: int, level: float):
        super().__init__(f"phase {phase} has an empty super-level set at level {level}")
        self.phase = phase


@dataclass
class DiskConfig:
    centers: np.ndarray
    radii: np.ndarray
    domain: Shape
    dim: int = field(init=False)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        self.dim = self.centers.shape[1]
        if len(self.radii) != len(self.centers):
            raise PackingError("one radius per center is required")
        if self.dim != self.domain.dim:
            raise PackingError("center dimension does not match the domain")

    @property
    def k(self) -> int:
        return len(self.centers)

    def violation(self) -> float:
        """Largest constraint violation (<= 0 when feasible)."""
        worst = float(np.max(self.radii - boundary_distance(self.centers, self.domain)))
        if self.k > 1:
            d = _pair_distances(self.centers)
            iu = np.triu_indices(self.k, 1)
            worst = max(worst, float(np.max((self.radii[:, None] + self.radii[None, :] - d)[iu])))
        return worst

    def is_feasible(self, tol: float = FEAS_TOL) -> bool:
        return self.violation() <= tol

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "domain": self.domain.to_dict(),
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
        }


@dataclass
class PackingResult:
    config: DiskConfig
    objective: str
    value: float
    active_constraints: list[str]
    iterations: int = 0
    initial_value: float = float("nan")

    def to_dict(self) -> dict:
        out = self.config.to_dict()
        out.update(
            objective=self.objective,
            value=self.value,
            initial_value=self.initial_value,
            iterations=self.iterations,
            active_constraints=list(self.active_constraints),
        )
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PackingResult":
        cfg = DiskConfig(data["centers"], data["radii"], shape_from_dict(data["domain"]))
        return cls(cfg, data["objective"], data["value"], list(data["active_constraints"]))


def extract_centers(sys: PhaseSystem, level: float = 0.5) -> np.ndarray:
    """Barycenter of the nodes with ``u_i > level`` for each phase, shape (k, dim)."""
    coords = sys.grid.coordinates()
    out = []
    for i in range(sys.k):
        sel = (sys.phases[i] > level) & sys.mask.inside
        if not sel.any():
            raise ExtractionError(i, level)
        out.append(coords[sel].mean(axis=0))
    return np.array(out)


def boundary_distance(x, domain: Shape) -> np.ndarray | float:
    """Signed distance to the domain boundary (negative outside)."""
    pts = np.asarray(x, dtype=float)
    d = domain.signed_distance(pts.reshape(-1, domain.dim))
    return float(d[0]) if pts.ndim == 1 else d


def _pair_distances(c: np.ndarray) -> np.ndarray:
    diff = c[:, None, :] - c[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _check_start(centers, domain: Shape) -> np.ndarray:
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    if c.shape[1] != domain.dim:
        raise PackingError("center dimension does not match the domain")
    if len(c) > 1:
        d = _pair_distances(c)[np.triu_indices(len(c), 1)]
        if d.min() <= 1e-12 * max(1.0, float(np.abs(c).max())):
            raise PackingError("coincident centers")
    if np.any(boundary_distance(c, domain) <= 0):
        raise PackingError("every center must lie strictly inside the domain")
    if domain.halfspaces() is None and not isinstance(domain, Ball):
        raise PackingError(f"packing needs a convex polytope or a ball, got {domain.kind}")
    return c


def locality_radius(centers: np.ndarray, domain: Shape) -> np.ndarray:
    """Per-center displacement bound.

    The larger of ten times the starting common radius and half the distance
    to the nearest other center; unbounded for a single ball.
    """
    k = len(centers)
    if k == 1:
        return np.array([np.inf])
    d = _pair_distances(centers)
    np.fill_diagonal(d, np.inf)
    return np.maximum(0.5 * d.min(axis=1), 10.0 * _common_radius(centers, domain))


class _Walls:
    """Linearized wall constraints ``a . delta + r_i <= b`` for one center."""

    def __init__(self, domain: Shape):
        self.domain = domain
        hs = domain.halfspaces()
        self.normals, self.offsets = hs if hs is not None else (None, None)

    def rows(self, c: np.ndarray):
        if self.normals is not None:
            # n.(c+delta) + b >= r  ->  -n.delta + r <= n.c + b
            return -self.normals, self.normals @ c + self.offsets
        ball: Ball = self.domain
        v = c - ball.center
        rho = float(np.linalg.norm(v))
        u = v / rho if rho > 0 else np.zeros_like(v)
        return u[None, :], np.array([ball.radius - rho])

    def labels(self, i: int, c: np.ndarray, r: float) -> list[str]:
        if self.normals is not None:
            slack = self.normals @ c + self.offsets - r
            return [f"wall:{i}:face{f}" for f in np.flatnonzero(slack <= ACTIVE_TOL)]
        return [f"wall:{i}"] if boundary_distance(c, self.domain) - r <= ACTIVE_TOL else []


def _active(c: np.ndarray, radii: np.ndarray, walls: _Walls) -> list[str]:
    out = []
    k = len(c)
    d = _pair_distances(c)
    for i in range(k):
        for j in range(i + 1, k):
            if d[i, j] - radii[i] - radii[j] <= ACTIVE_TOL:
                out.append(f"pair:{i}-{j}")
    for i in range(k):
        out.extend(walls.labels(i, c[i], radii[i]))
    return out


def _common_radius(c: np.ndarray, domain: Shape) -> float:
    r = float(np.min(boundary_distance(c, domain)))
    if len(c) > 1:
        d = _pair_distances(c)[np.triu_indices(len(c), 1)]
        r = min(r, 0.5 * float(d.min()))
    return r


def _lp_step(c, walls: _Walls, delta_box, n_r: int, cost_r: np.ndarray, r_bounds):
    """Solve one linearized subproblem; returns (new centers, new radius vars) or None.

    ``n_r`` is 1 for a shared radius and k for individual radii.
    """
    k, dim = c.shape
    nx = k * dim
    rows, rhs = [], []

    def r_col(i):
        return nx + (0 if n_r == 1 else i)

    d = _pair_distances(c)
    for i in range(k):
        for j in range(i + 1, k):
            u = (c[i] - c[j]) / d[i, j]
            row = np.zeros(nx + n_r)
            row[i * dim:(i + 1) * dim] = -u
            row[j * dim:(j + 1) * dim] = u
            row[r_col(i)] += 1.0
            row[r_col(j)] += 1.0
            rows.append(row)
            rhs.append(d[i, j])
    for i in range(k):
        a, b = walls.rows(c[i])
        for a_f, b_f in zip(a, b):
            row = np.zeros(nx + n_r)
            row[i * dim:(i + 1) * dim] = a_f
            row[r_col(i)] = 1.0
            rows.append(row)
            rhs.append(b_f)
    cost = np.concatenate([np.zeros(nx), -cost_r])
    bounds = list(delta_box) + list(r_bounds)
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        return None
    return c + res.x[:nx].reshape(k, dim), res.x[nx:]


def _delta_box(c, c0, reach, radius):
    lo = np.maximum(-radius, (c0 - reach[:, None]) - c)
    hi = np.minimum(radius, (c0 + reach[:, None]) - c)
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    return list(zip(lo.ravel(), hi.ravel()))


def _pattern_search(value_fn, x, x0, reach, step, min_step, budget=5000):
    """Coordinate search on the true objective over a flat vector.

    ``reach`` bounds ``|x - x0|`` per component.  Returns ``(x, value)`` when
    something better was found, else None.
    """
    best = value_fn(x)
    improved = False
    evals = 0
    while step >= min_step and evals < budget:
        moved = False
        for idx in range(x.size):
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[idx] += sgn * step
                if abs(trial[idx] - x0[idx]) > reach[idx]:
                    continue
                v = value_fn(trial)
                evals += 1
                if v > best + 1e-15 * max(1.0, abs(best)):
                    x, best, moved, improved = trial, v, True, True
                    break
        if not moved:
            step *= 0.5
    return (x, best) if improved else None


def refine_maximin(centers, domain: Shape, max_shift=None, maxiter: int = 500) -> PackingResult:
    """Locally maximize the common radius of k disjoint balls inside ``domain``."""
    c0 = _check_start(centers, domain)
    walls = _Walls(domain)
    reach = locality_radius(c0, domain) if max_shift is None else np.broadcast_to(np.asarray(max_shift, float), (len(c0),))
    scale = float(np.ptp(np.concatenate(domain.bounds()).reshape(2, -1), axis=0).max())
    c = c0.copy()
    r = _common_radius(c, domain)
    r_init = r
    radius = 0.1 * scale
    min_radius = 1e-14 * scale
    it = 0
    fallback_used = False
    while it < maxiter:
        it += 1
        step = _lp_step(c, walls, _delta_box(c, c0, reach, radius), 1, np.ones(1), [(0.0, None)])
        if step is not None:
            c_new, r_model = step
            r_new = _common_radius(c_new, domain)
            predicted = float(r_model[0]) - r
            if r_new > r:
                gain = r_new - r
                c, r = c_new, r_new
                if predicted > 0 and gain >= 0.5 * predicted:
                    radius = min(2.0 * radius, scale)
                fallback_used = False
                continue
            if predicted <= 1e-15 * scale:
                radius = 0.0
        radius *= 0.25
        if radius < min_radius:
            if fallback_used:
                break
            fallback_used = True
            shape = c.shape
            found = _pattern_search(
                lambda x: _common_radius(x.reshape(shape), domain),
                c.ravel(), c0.ravel(), np.repeat(reach, c.shape[1]), 1e-3 * scale, 1e-12 * scale,
            )
            if found is None:
                break
            c, r = found[0].reshape(shape), found[1]
            radius = 1e-3 * scale
    radii = np.full(len(c), r)
    cfg = DiskConfig(c, radii, domain)
    log.debug("maximin: r=%.12g after %d iterations", r, it)
    return PackingResult(cfg, "maximin", r, _active(c, radii, walls), it, r_init)


def _repair(c: np.ndarray, radii: np.ndarray, domain: Shape) -> np.ndarray:
    """Shrink radii until the configuration is feasible."""
    r = np.minimum(radii, boundary_distance(c, domain))
    k = len(c)
    if k > 1:
        d = _pair_distances(c)
        for _ in range(k * k):
            s = r[:, None] + r[None, :]
            np.fill_diagonal(s, 0.0)
            over = s > d
            np.fill_diagonal(over, False)
            if not over.any():
                break
            i, j = np.unravel_index(np.argmax(np.where(over, s - d, -np.inf)), s.shape)
            f = d[i, j] / s[i, j]
            r[i] *= f
            r[j] *= f
    return r


def _log_value(r: np.ndarray) -> float:
    return float(np.sum(np.log(r))) if np.all(r > 0) else -np.inf


def refine_product(centers, domain: Shape, max_shift=None, maxiter: int = 2000) -> PackingResult:
    """Locally maximize ``sum(log r_i)`` over centers and individual radii."""
    c0 = _check_start(centers, domain)
    walls = _Walls(domain)
    k = len(c0)
    reach = locality_radius(c0, domain) if max_shift is None else np.broadcast_to(np.asarray(max_shift, float), (k,))
    scale = float(np.ptp(np.concatenate(domain.bounds()).reshape(2, -1), axis=0).max())
    c = c0.copy()
    start = np.minimum(boundary_distance(c, domain), 0.5 * np.min(_pair_distances(c) + np.diag(np.full(k, np.inf)), axis=1) if k > 1 else np.inf)
    r = _repair(c, np.asarray(start, dtype=float).reshape(k), domain)
    value = _log_value(r)
    initial = value
    radius = 0.1 * scale
    min_radius = 1e-14 * scale
    it = 0
    fallback_used = False

    nx = c0.size

    def feasible_value(x):
        cfg = DiskConfig(x[:nx].reshape(c0.shape), x[nx:], domain)
        return _log_value(cfg.radii) if cfg.violation() <= 0 else -np.inf

    while it < maxiter:
        it += 1
        r_bounds = [(max(0.5 * ri, ri - radius), ri + radius) for ri in r]
        step = _lp_step(c, walls, _delta_box(c, c0, reach, radius), k, 1.0 / r, r_bounds)
        if step is not None:
            c_new, r_model = step
            r_new = _repair(c_new, r_model, domain)
            v_new = _log_value(r_new)
            predicted = float(np.sum((r_model - r) / r))
            if v_new > value + 1e-15 * max(1.0, abs(value)):
                gain = v_new - value
                c, r, value = c_new, r_new, v_new
                if predicted > 0 and gain >= 0.5 * predicted:
                    radius = min(2.0 * radius, scale)
                fallback_used = False
                continue
            if predicted <= 1e-15:
                radius = 0.0
        radius *= 0.25
        if radius < min_radius:
            if fallback_used:
                break
            fallback_used = True
            x0 = np.concatenate([c0.ravel(), np.zeros(k)])
            reach_x = np.concatenate([np.repeat(reach, c.shape[1]), np.full(k, np.inf)])
            found = _pattern_search(feasible_value, np.concatenate([c.ravel(), r]), x0, reach_x, 1e-3 * scale, 1e-12 * scale)
            if found is None:
                break
            c, r = found[0][:nx].reshape(c0.shape), found[0][nx:]
            value = found[1]
            radius = 1e-3 * scale
    cfg = DiskConfig(c, r, domain)
    log.debug("product: value=%.12g after %d iterations", value, it)
    return PackingResult(cfg, "log_product", value, _active(c, r, walls), it, initial)

