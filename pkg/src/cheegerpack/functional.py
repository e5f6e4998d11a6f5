"""Penalized multiphase Modica-Mortola energy for alpha-Cheeger clusters.

For phases ``u_1..u_k`` on a grid with ``q = 2N/(N-1)``::

    MM_i    = eps * int |grad u_i|^2 + (9/eps) * int u_i^2 (1-u_i)^2
    V_i     = int |u_i|^q
    ratio_i = MM_i / V_i**alpha
    F       = sum_i (ratio_i / scale)**p + c * sum_{i<j} int u_i^2 u_j^2

with ``c = 1/eps`` unless overridden and ``scale = 1``.  Gradients are exact
for the discrete energy (quadrature and edge stencils), not for the
continuum Euler-Lagrange equation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import GridSpec, PhaseSystem, edge_differences, neg_laplacian
from .levelset import superlevel, superlevel_2d_clipped

DOUBLE_WELL = 9.0
VOLUME_FLOOR = 1e-12


class EnergyError(ValueError):
    pass


@dataclass
class EnergyParams:
    alpha: float
    eps: float
    p: float = 1.0
    penalty: float | None = None
    ratio_scale: float = 1.0

    def penalty_coefficient(self) -> float:
        return 1.0 / self.eps if self.penalty is None else float(self.penalty)

    def validate(self, dim: int) -> None:
        crit = (dim - 1) / dim
        if not self.alpha > crit:
            raise EnergyError(f"alpha must exceed (N-1)/N = {crit:.6g}, got {self.alpha}")
        if not self.eps > 0:
            raise EnergyError(f"eps must be positive, got {self.eps}")
        if not self.p >= 1:
            raise EnergyError(f"p must be >= 1, got {self.p}")
        if not self.ratio_scale > 0:
            raise EnergyError("ratio_scale must be positive")


@dataclass
class EnergyValue:
    total: float
    per_phase_perimeter: list[float]
    per_phase_volume: list[float]
    per_phase_ratio: list[float]
    penalty_term: float

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.total))

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class SharpMeasurement:
    level: float
    per_phase_area: list[float] = field(default_factory=list)
    per_phase_perimeter: list[float] = field(default_factory=list)
    per_phase_h_alpha: list[float] = field(default_factory=list)
    alpha: float = 1.0

    @property
    def empty(self) -> bool:
        return all(a <= 0 for a in self.per_phase_area)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return float(obj) if isinstance(obj, np.floating) else obj


def volume_exponent(dim: int) -> float:
    return 2.0 * dim / (dim - 1)


def _phases(sys: PhaseSystem) -> np.ndarray:
    return np.where(sys.mask.inside[None], sys.phases, 0.0)


def _modica_mortola(u: np.ndarray, grid: GridSpec, eps: float, want_grad: bool):
    """Per-phase MM terms for a stack of phases (k, *shape)."""
    w = grid.cell_weight
    h = grid.spacing
    k = u.shape[0]
    grad_sq = np.zeros(k)
    for a in range(grid.dim):
        d = edge_differences(u, a + 1, grid.periodic)
        grad_sq += np.sum((d * d).reshape(k, -1), axis=1) / h[a] ** 2
    one_minus = 1.0 - u
    well = np.sum((u * u * one_minus * one_minus).reshape(k, -1), axis=1)
    mm = w * (eps * grad_sq + DOUBLE_WELL / eps * well)
    if not want_grad:
        return mm, None
    dmm = np.empty_like(u)
    for i in range(k):
        dmm[i] = 2.0 * eps * neg_laplacian(u[i], grid)
    dmm += (DOUBLE_WELL / eps) * 2.0 * u * one_minus * (1.0 - 2.0 * u)
    return mm, w * dmm


def _cross_penalty(u: np.ndarray, w: float, coef: float, want_grad: bool):
    if u.shape[0] < 2:
        return 0.0, (np.zeros_like(u) if want_grad else None)
    sq = u * u
    # phase sums over sorted values: exactly invariant under relabeling
    ordered = np.sort(sq, axis=0)
    s2 = ordered.sum(axis=0)
    pair_sum = 0.5 * (s2 * s2 - (ordered * ordered).sum(axis=0))
    value = coef * w * float(pair_sum.sum())
    if not want_grad:
        return value, None
    return value, coef * w * 2.0 * u * (s2[None] - sq)


def energy_and_gradient(sys: PhaseSystem, params: EnergyParams, want_grad: bool = True):
    """Return ``(EnergyValue, gradient or None)``; gradient is None when the energy is infinite."""
    grid = sys.grid
    params.validate(grid.dim)
    u = _phases(sys)
    k = u.shape[0]
    w = grid.cell_weight
    q = volume_exponent(grid.dim)
    alpha, p, rho = params.alpha, params.p, params.ratio_scale

    mm, dmm = _modica_mortola(u, grid, params.eps, want_grad)
    au = np.abs(u)
    vol = w * np.sum((au**q).reshape(k, -1), axis=1)
    pen, dpen = _cross_penalty(u, w, params.penalty_coefficient(), want_grad)

    floor = VOLUME_FLOOR * grid.volume
    if np.any(vol < floor):
        ratio = np.where(vol < floor, np.inf, mm / np.maximum(vol, floor) ** alpha)
        ev = EnergyValue(np.inf, mm.tolist(), vol.tolist(), ratio.tolist(), pen)
        return ev, None

    ratio = mm / vol**alpha
    scaled = ratio / rho
    total = math.fsum(scaled**p) + pen
    ev = EnergyValue(total, mm.tolist(), vol.tolist(), ratio.tolist(), pen)
    if not want_grad:
        return ev, None

    grad = np.empty_like(u)
    for i in range(k):
        dvol = w * q * au[i] ** (q - 1) * np.sign(u[i])
        dratio = dmm[i] / vol[i] ** alpha - alpha * mm[i] * vol[i] ** (-alpha - 1) * dvol
        grad[i] = p * scaled[i] ** (p - 1) / rho * dratio
    grad += dpen
    grad[:, ~sys.mask.inside] = 0.0
    return ev, grad


def evaluate(sys: PhaseSystem, params: EnergyParams) -> EnergyValue:
    return energy_and_gradient(sys, params, want_grad=False)[0]


def gradient(sys: PhaseSystem, params: EnergyParams) -> np.ndarray:
    ev, grad = energy_and_gradient(sys, params)
    if grad is None:
        raise EnergyError("gradient undefined: energy is infinite (a phase has vanishing volume)")
    return grad


def evaluate_log_perimeter(
    sys: PhaseSystem,
    eps: float,
    area_target: float | None = None,
    area_weight: float | None = None,
    penalty: float | None = None,
    normalize: bool = True,
):
    """Sum of log MM terms with a quadratic area penalty; returns ``(value, gradient)``.

    ``area_target`` defaults to an equal share of the domain, ``area_weight``
    to ``10/eps`` and ``penalty`` to ``1/eps``.  With ``normalize`` each term
    is ``log(MM_i / V_i**((N-1)/N))``: a fading phase no longer drives the
    value to minus infinity, and on sharp cells the shift is the constant
    ``(N-1)/N * log(area)``.  The gradient is None when the value is ``inf``.
    """
    grid = sys.grid
    u = _phases(sys)
    k = u.shape[0]
    w = grid.cell_weight
    if area_target is None:
        area_target = w * sys.mask.count / k
    if area_weight is None:
        area_weight = 10.0 / eps
    coef = 1.0 / eps if penalty is None else penalty

    mm, dmm = _modica_mortola(u, grid, eps, True)
    if np.any(mm <= 0):
        return np.inf, None
    shape = (k,) + (1,) * grid.dim
    logs = np.log(mm)
    grad = dmm / mm.reshape(shape)
    if normalize:
        q = volume_exponent(grid.dim)
        crit = (grid.dim - 1) / grid.dim
        au = np.abs(u)
        vol = w * np.sum((au**q).reshape(k, -1), axis=1)
        if np.any(vol < VOLUME_FLOOR * grid.volume):
            return np.inf, None
        logs = logs - crit * np.log(vol)
        grad -= crit * (w * q * au ** (q - 1) * np.sign(u)) / vol.reshape(shape)
    areas = w * np.sum(u.reshape(k, -1), axis=1)
    excess = areas - area_target
    pen, dpen = _cross_penalty(u, w, coef, True)
    value = math.fsum(logs) + area_weight * math.fsum(excess**2) + pen
    grad += (2.0 * area_weight * w * excess).reshape(shape)
    grad += dpen
    grad[:, ~sys.mask.inside] = 0.0
    return value, grad


def measure_threshold(sys: PhaseSystem, level: float, alpha: float, domain=None) -> SharpMeasurement:
    """Area, perimeter and ``perimeter/area**alpha`` of each ``{u_i > level}``.

    With a planar ``domain`` whose outline is known (and which is not the grid
    box itself) the sets are clipped to it before measuring.
    """
    if not 0.0 < level < 1.0:
        raise EnergyError(f"level must lie in (0, 1), got {level}")
    u = _phases(sys)
    out = SharpMeasurement(level=level, alpha=alpha)
    outline = None
    if domain is not None and sys.grid.dim == 2 and not sys.grid.periodic and not domain.is_full_box:
        outline = domain.outline()
    for i in range(sys.k):
        if outline is not None:
            area, perim = superlevel_2d_clipped(u[i], sys.grid.spacing, sys.grid.origin, level, outline)
        else:
            area, perim = superlevel(u[i], sys.grid.spacing, level, sys.grid.periodic)
        out.per_phase_area.append(area)
        out.per_phase_perimeter.append(perim)
        out.per_phase_h_alpha.append(perim / area**alpha if area > 0 else np.inf)
    return out
