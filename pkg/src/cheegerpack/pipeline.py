"""Staged phase-field optimization: random start, solve, refine, repeat."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .domains import DomainError, Shape, shape_from_dict
from .functional import (
    EnergyError,
    EnergyParams,
    SharpMeasurement,
    energy_and_gradient,
    evaluate_log_perimeter,
    measure_threshold,
)
from .grid import DomainMask, GridSpec, PhaseSystem, refine
from .optimizer import BoundProblem, OptimizerOptions, OptimizerReport, minimize

log = logging.getLogger(__name__)

OBJECTIVES = ("cheeger_pnorm", "log_perimeter")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_INT_KEYS = {"k", "dim", "m0", "stages", "seed", "target_resolution", "maxit", "memory", "final_eps_steps"}
_FLOAT_KEYS = {
    "alpha", "p", "p_start", "penalty_scale", "eps_factor", "coarse_eps_factor", "tol", "ftol", "penalty", "ratio_scale", "area_target", "area_weight",
}
_NULLABLE = {"p_start", "dim", "m0", "stages", "coarse_eps_factor", "target_resolution", "penalty", "area_target", "area_weight"}


def _check_type(key: str, value) -> None:
    if value is None and key in _NULLABLE:
        return
    if key in _INT_KEYS and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if key in _FLOAT_KEYS and not (isinstance(value, (int, float)) and not isinstance(value, bool)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if key == "periodic" and not isinstance(value, bool):
        raise ConfigError(key, f"expected true/false, got {value!r}")
    if key == "domain" and not isinstance(value, dict):
        raise ConfigError(key, "expected an object with a 'type' entry")
    if key == "objective" and not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {value!r}")


@dataclass
class RunConfig:
    k: int = 1
    alpha: float = 1.0
    p: float = 1.0
    domain: dict = field(default_factory=lambda: {"type": "square", "side": 1.0})
    dim: int | None = None
    m0: int | None = None
    stages: int | None = None
    eps_factor: float = 1.0
    coarse_eps_factor: float | None = None
    # number of interface widths visited on the final grid, geometric from
    # coarse_eps_factor down to eps_factor
    final_eps_steps: int = 1
    # exponent of the first stage, ramped geometrically to p at the last one
    p_start: float | None = None
    seed: int = 0
    objective: str = "cheeger_pnorm"
    periodic: bool = False
    target_resolution: int | None = None
    maxit: int = 10000
    tol: float = 1e-8
    memory: int = 5
    ftol: float = 0.0
    penalty: float | None = None
    # cross-phase coefficient is penalty_scale/eps unless penalty is given
    penalty_scale: float = 1.0
    ratio_scale: float = 1.0
    area_target: float | None = None
    area_weight: float | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            _check_type(key, value)
        cfg = cls(**data)
        cfg.resolve()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def shape(self) -> Shape:
        try:
            return shape_from_dict(self.domain)
        except DomainError as exc:
            raise ConfigError("domain", str(exc)) from None

    def resolve(self) -> "RunConfig":
        """Fill derived defaults and validate; returns self."""
        shape = self.shape()
        if self.dim is None:
            self.dim = shape.dim
        if self.dim != shape.dim:
            raise ConfigError("dim", f"domain is {shape.dim}-D but dim={self.dim}")
        if self.dim not in (2, 3):
            raise ConfigError("dim", "only 2-D and 3-D are supported")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k", "phase count must be a positive integer")
        if self.objective not in OBJECTIVES:
            raise ConfigError("objective", f"must be one of {OBJECTIVES}")
        crit = (self.dim - 1) / self.dim
        if self.objective == "cheeger_pnorm" and not self.alpha > crit:
            raise ConfigError("alpha", f"alpha must exceed (N-1)/N = {crit:.6g}, got {self.alpha}")
        if not self.p >= 1:
            raise ConfigError("p", "p must be >= 1")
        if self.p_start is not None and not 1 <= self.p_start <= self.p:
            raise ConfigError("p_start", "p_start must lie in [1, p]")
        if not 1.0 <= self.eps_factor <= 4.0:
            raise ConfigError("eps_factor", "eps_factor must lie in [1, 4]")
        if self.coarse_eps_factor is not None and not 1.0 <= self.coarse_eps_factor <= 4.0:
            raise ConfigError("coarse_eps_factor", "coarse_eps_factor must lie in [1, 4]")
        if not isinstance(self.final_eps_steps, int) or self.final_eps_steps < 1:
            raise ConfigError("final_eps_steps", "must be a positive integer")
        if self.m0 is None:
            self.m0 = 20 if self.dim == 2 else 10
        if self.m0 < 4:
            raise ConfigError("m0", "need at least 4 nodes per axis")
        if self.target_resolution is None:
            self.target_resolution = 300 if self.dim == 2 else 100
        if self.stages is None:
            self.stages = 1
            while self.final_m() < self.target_resolution:
                self.stages += 1
        if self.stages < 1:
            raise ConfigError("stages", "need at least one stage")
        if self.final_m() < self.target_resolution:
            raise ConfigError(
                "stages",
                f"{self.stages} stages from m0={self.m0} reach m={self.final_m()} < target_resolution={self.target_resolution}",
            )
        if self.periodic and not shape.is_full_box:
            raise ConfigError("periodic", "periodic grids need a rectangle/box domain")
        if not self.penalty_scale > 0:
            raise ConfigError("penalty_scale", "must be positive")
        if self.maxit < 1 or self.tol <= 0 or self.memory < 1:
            raise ConfigError("maxit", "optimizer options must be positive")
        return self

    def grid_sizes(self) -> list[int]:
        sizes = [self.m0]
        for _ in range(self.stages - 1):
            sizes.append(2 * sizes[-1] if self.periodic else 2 * sizes[-1] - 1)
        return sizes

    def final_m(self) -> int:
        return self.grid_sizes()[-1]

    def stage_eps_factor(self, step: int) -> float:
        """Interface width factor of a stage; earlier stages may use a wider one."""
        if step < self.stages - 1 and self.coarse_eps_factor is not None:
            return self.coarse_eps_factor
        return self.eps_factor

    def stage_p(self, step: int) -> float:
        if self.p_start is None or self.stages == 1:
            return self.p
        return float(self.p_start * (self.p / self.p_start) ** (step / (self.stages - 1)))

    def final_eps_factors(self) -> list[float]:
        start = self.coarse_eps_factor if self.coarse_eps_factor is not None else self.eps_factor
        n = self.final_eps_steps
        if n == 1:
            return [self.eps_factor]
        return [float(start * (self.eps_factor / start) ** (j / (n - 1))) for j in range(n)]


@dataclass
class StageRecord:
    m: int
    eps: float
    energy: float
    report: OptimizerReport
    seconds: float

    def to_dict(self) -> dict:
        return {"m": self.m, "eps": self.eps, "energy": self.energy, "seconds": self.seconds, **self.report.to_dict()}


@dataclass
class RunResult:
    final_system: PhaseSystem
    stages: list[StageRecord]
    sharp: SharpMeasurement
    sharp_eps: SharpMeasurement
    config: RunConfig

    @property
    def reports(self) -> list[OptimizerReport]:
        return [s.report for s in self.stages]

    @property
    def final_energy(self) -> float:
        return self.stages[-1].energy

    @property
    def eps(self) -> float:
        return self.stages[-1].eps

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "stages": [s.to_dict() for s in self.stages],
            "final_energy": self.final_energy,
            "sharp": self.sharp.to_dict(),
            "sharp_eps": self.sharp_eps.to_dict(),
        }


def interface_width(grid: GridSpec, eps_factor: float) -> float:
    return eps_factor * float(grid.spacing.max())


def init_random(grid: GridSpec, mask: DomainMask, k: int, seed: int) -> PhaseSystem:
    """Independent uniform values per node, rescaled so that sum_i u_i <= 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=(k,) + grid.shape)
    u /= np.maximum(1.0, u.sum(axis=0))[None]
    u[:, ~mask.inside] = 0.0
    return PhaseSystem(grid, mask, u)


def _objective(grid: GridSpec, mask: DomainMask, cfg: RunConfig, eps: float, p: float | None = None):
    k = cfg.k
    shape = (k,) + grid.shape
    penalty = cfg.penalty if cfg.penalty is not None else cfg.penalty_scale / eps
    if cfg.objective == "cheeger_pnorm":
        params = EnergyParams(cfg.alpha, eps, cfg.p if p is None else p, penalty, cfg.ratio_scale)

        def fun(x):
            ev, g = energy_and_gradient(PhaseSystem(grid, mask, x.reshape(shape)), params)
            return ev.total, None if g is None else g.ravel()

    else:

        def fun(x):
            val, g = evaluate_log_perimeter(
                PhaseSystem(grid, mask, x.reshape(shape)), eps, cfg.area_target, cfg.area_weight, penalty
            )
            return val, None if g is None else g.ravel()

    return fun


def run(config: RunConfig, progress=None) -> RunResult:
    cfg = config.resolve()
    shape = cfg.shape()
    grid = GridSpec.for_shape(shape, cfg.m0, cfg.periodic)
    mask = DomainMask.build(grid, shape)
    sys = init_random(grid, mask, cfg.k, cfg.seed)
    opts = OptimizerOptions(memory=cfg.memory, tol=cfg.tol, maxit=cfg.maxit, ftol=cfg.ftol)
    stages: list[StageRecord] = []

    for step in range(cfg.stages):
        if step > 0:
            fine = grid.refined()
            phases = np.stack([refine(u, grid) for u in sys.phases])
            grid = fine
            mask = DomainMask.build(grid, shape)
            phases[:, ~mask.inside] = 0.0
            sys = PhaseSystem(grid, mask, np.clip(phases, 0.0, 1.0))
        factors = cfg.final_eps_factors() if step == cfg.stages - 1 else [cfg.stage_eps_factor(step)]
        upper = np.broadcast_to(mask.inside, sys.phases.shape).astype(float).ravel()
        for factor in factors:
            eps = interface_width(grid, factor)
            prob = BoundProblem(_objective(grid, mask, cfg, eps, cfg.stage_p(step)), np.zeros_like(upper), upper)
            t0 = time.perf_counter()
            x, report = minimize(prob, sys.phases.ravel(), opts)
            seconds = time.perf_counter() - t0
            sys = PhaseSystem(grid, mask, x.reshape(sys.phases.shape))
            stages.append(StageRecord(grid.m, eps, report.final_value, report, seconds))
            log.info(
                "stage %d/%d m=%d eps=%.4g energy=%.10g its=%d (%s) %.1fs",
                step + 1, cfg.stages, grid.m, eps, report.final_value, report.iterations, report.message, seconds,
            )
            if progress is not None:
                progress(stages[-1])

    sharp = measure_threshold(sys, 0.5, cfg.alpha, shape)
    sharp_eps = measure_threshold(sys, eps_level(grid, cfg.eps_factor), cfg.alpha, shape)
    return RunResult(sys, stages, sharp, sharp_eps, cfg)


def eps_level(grid: GridSpec, eps_factor: float) -> float:
    """Level value of the epsilon-level set (dimensionless ``eps_factor/m``)."""
    return min(0.5, eps_factor / grid.m)


__all__ = [
    "ConfigError",
    "EnergyError",
    "RunConfig",
    "RunResult",
    "StageRecord",
    "init_random",
    "run",
]
