"""Core components for kerrsight"""

from .errors import ErrorType, KerrsightError
from .forward import Contrast, FixedPointConfig, ForwardResult, far_field, solve_linear, solve_nonlinear
from .geometry import Disk, Grid2D, Kite, Polygon, coverage, rasterize
from .herglotz import AngularQuadrature, Density, herglotz, herglotz_adjoint
from .ls_kernel import LinearSolveConfig, build_kernel
from .reconstruction import ObjectiveKind, OptimizerConfig, indicator_map, minimize_on_sphere
from .scene import Scene, far_field_operator, homogeneous_scene
from .tracer import RunTracer, StepType

__all__ = [
    'ErrorType',
    'KerrsightError',
    'Contrast',
    'FixedPointConfig',
    'ForwardResult',
    'far_field',
    'solve_linear',
    'solve_nonlinear',
    'Disk',
    'Grid2D',
    'Kite',
    'Polygon',
    'coverage',
    'rasterize',
    'AngularQuadrature',
    'Density',
    'herglotz',
    'herglotz_adjoint',
    'LinearSolveConfig',
    'build_kernel',
    'ObjectiveKind',
    'OptimizerConfig',
    'indicator_map',
    'minimize_on_sphere',
    'Scene',
    'far_field_operator',
    'homogeneous_scene',
    'RunTracer',
    'StepType',
]
