"""Phase-field alpha-Cheeger sets, clusters and ball packings on grids."""

from .domains import Ball, DomainError, Polygon, Polytope, Rectangle, Shape, shape_from_dict
from .functional import EnergyParams, EnergyValue, SharpMeasurement, energy_and_gradient, measure_threshold
from .grid import DomainMask, GridSpec, PhaseSystem
from .klr import CheegerExact, ConvexPolygon, analytic_alpha_cheeger_ball, cheeger_exact, compare, polygonize
from .optimizer import BoundProblem, InitializationError, OptimizerOptions, OptimizerReport, minimize
from .packing import DiskConfig, PackingResult, extract_centers, refine_maximin, refine_product
from .pipeline import ConfigError, RunConfig, RunResult, run

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BoundProblem",
    "CheegerExact",
    "ConfigError",
    "ConvexPolygon",
    "DiskConfig",
    "DomainError",
    "DomainMask",
    "EnergyParams",
    "EnergyValue",
    "GridSpec",
    "InitializationError",
    "OptimizerOptions",
    "OptimizerReport",
    "PackingResult",
    "PhaseSystem",
    "Polygon",
    "Polytope",
    "Rectangle",
    "RunConfig",
    "RunResult",
    "Shape",
    "SharpMeasurement",
    "analytic_alpha_cheeger_ball",
    "cheeger_exact",
    "compare",
    "energy_and_gradient",
    "extract_centers",
    "measure_threshold",
    "minimize",
    "polygonize",
    "refine_maximin",
    "refine_product",
    "run",
    "shape_from_dict",
]
