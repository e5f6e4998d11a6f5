"""Projected limited-memory BFGS for box-constrained minimization.

Variables sitting on a bound with the gradient pushing outward are frozen;
the two-loop recursion is applied to the remaining gradient and trial points
are projected back onto the box.  Step lengths come from backtracking with a
sufficient-decrease test; infinite objective values count as failed trials.
Near the optimum, where value differences drown in roundoff, a trial that does
not increase the value is accepted if the directional slope has flattened.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray | None]"]


class InitializationError(RuntimeError):
    """The objective stayed infinite at every admissible starting perturbation."""


@dataclass
class BoundProblem:
    objective_and_gradient: Objective
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bounds have different shapes")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dimension(self) -> int:
        return self.lower.size

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass
class OptimizerOptions:
    memory: int = 5
    tol: float = 1e-8
    maxit: int = 10000
    # optional stop on relative decrease; 0 disables it
    ftol: float = 0.0
    armijo: float = 1e-4
    max_backtracks: int = 50
    secant_refine: bool = True

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class OptimizerReport:
    iterations: int = 0
    final_value: float = np.inf
    projected_gradient_norm: float = np.inf
    converged: bool = False
    value_trace: list[float] = field(default_factory=list)
    message: str = ""
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_value": self.final_value,
            "projected_gradient_norm": self.projected_gradient_norm,
            "converged": self.converged,
            "message": self.message,
            "evaluations": self.evaluations,
        }


def projected_gradient(x, g, lower, upper) -> np.ndarray:
    return np.clip(x - g, lower, upper) - x


def _two_loop(q: np.ndarray, pairs) -> np.ndarray:
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        q = q - a * y
        alphas.append(a)
    s, y, _ = pairs[-1]
    r = (np.dot(s, y) / np.dot(y, y)) * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, r)
        r = r + (a - b) * s
    return r


def minimize(prob: BoundProblem, x0, opts: OptimizerOptions | None = None):
    """Minimize within ``[lower, upper]``; returns ``(x, OptimizerReport)``."""
    opts = opts or OptimizerOptions()
    lo, hi = prob.lower, prob.upper
    report = OptimizerReport()

    def call(x):
        report.evaluations += 1
        f, g = prob.objective_and_gradient(x)
        f = float(f)
        if not np.isfinite(f) or g is None:
            return np.inf, None
        return f, np.asarray(g, dtype=float).ravel()

    x = prob.project(np.asarray(x0, dtype=float).ravel().copy())
    f, g = call(x)
    if not np.isfinite(f):
        center = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), np.clip(0.0, lo, hi))
        for _ in range(20):
            x = 0.5 * (x + center)
            f, g = call(x)
            if np.isfinite(f):
                break
        else:
            raise InitializationError("objective is infinite at the starting point and every perturbation")

    pairs: deque = deque(maxlen=opts.memory)
    report.value_trace.append(f)
    failures = 0
    pg_norm = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))

    while True:
        if pg_norm <= opts.tol:
            report.converged = True
            report.message = "projected gradient below tol"
            break
        if report.iterations >= opts.maxit:
            report.message = "maxit reached"
            break

        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)) | (lo == hi))
        gf = np.where(free, g, 0.0)
        if pairs:
            d = -_two_loop(gf, pairs)
            d[~free] = 0.0
            slope = float(np.dot(g, d))
            if not slope < 0:
                pairs.clear()
        if not pairs:
            d = -gf
            slope = float(np.dot(g, d))
            t = 1.0 / max(float(np.max(np.abs(d))), 1e-300)
        else:
            t = 1.0

        accepted = False
        for _ in range(opts.max_backtracks):
            xt = prob.project(x + t * d)
            step = xt - x
            decrease = float(np.dot(g, step))
            if decrease >= 0:
                t *= 0.5
                continue
            ft, gt = call(xt)
            if np.isfinite(ft) and ft <= f + opts.armijo * decrease:
                accepted = True
                break
            if np.isfinite(ft) and ft <= f and abs(ft - f) <= 1e-12 * abs(f):
                # value change lost in roundoff: fall back to a slope test
                if float(np.dot(gt, step)) <= (1 - 2 * opts.armijo) * -decrease:
                    accepted = True
                    break
            if np.isfinite(ft):
                # minimizer of the quadratic through f, slope and ft, safeguarded
                denom = 2.0 * (ft - f - decrease)
                t_new = t * (-decrease / denom) if denom > 0 else 0.5 * t
                t = min(max(t_new, 0.1 * t), 0.5 * t)
            else:
                t *= 0.5

        if not accepted:
            failures += 1
            if failures >= 2 or not pairs:
                report.message = "line search failed"
                break
            pairs.clear()
            continue
        failures = 0

        if opts.secant_refine and np.array_equal(xt, x + t * d):
            # secant root of the directional derivative: exact on quadratics
            slope_t = float(np.dot(gt, d))
            if slope_t != slope:
                t_sec = t * slope / (slope - slope_t)
                if t_sec > 0 and abs(t_sec - t) > 1e-10 * t:
                    xs = prob.project(x + t_sec * d)
                    fs, gs = call(xs)
                    if np.isfinite(fs) and fs < ft and fs <= f + opts.armijo * float(np.dot(g, xs - x)):
                        xt, ft, gt = xs, fs, gs

        s = xt - x
        y = gt - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        f_old = f
        x, f, g = xt, ft, gt
        report.iterations += 1
        report.value_trace.append(f)
        pg_norm = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
        if opts.ftol > 0 and (f_old - f) <= opts.ftol * max(abs(f_old), abs(f), 1.0):
            report.message = "relative reduction below ftol"
            break

    report.final_value = f
    report.projected_gradient_norm = pg_norm
    log.debug("minimize: %s after %d iterations, f=%.12g", report.message, report.iterations, f)
    return x, report
