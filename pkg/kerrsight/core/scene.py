"""
A scattering scene bundles everything the far field operator needs: grid,
kernel, contrast, quadrature and solver settings.

F(g) = (V(Hg))^inf evaluates one nonlinear forward solve driven by the
Herglotz wave Hg; F0 is its linear counterpart with q replaced by q0.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from kerrsight.core.errors import InvariantViolationError
from kerrsight.core.forward import (
    Contrast,
    FarFieldPattern,
    FixedPointConfig,
    ForwardResult,
    contrast_source,
    far_field,
    solve_linear,
    solve_nonlinear,
)
from kerrsight.core.geometry import Grid2D, Shape, coverage
from kerrsight.core.herglotz import (
    AngularQuadrature,
    Density,
    PlaneWaveBasis,
    evaluate_density,
    mode_matrix,
)
from kerrsight.core.ls_kernel import ConvolutionKernel, LinearSolveConfig, build_kernel
from kerrsight.core.tracer import RunTracer

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Scene:
    grid: Grid2D
    k: float
    contrast: Contrast
    quadrature: AngularQuadrature = field(default_factory=lambda: AngularQuadrature(256))
    N: int = 16
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    linear: LinearSolveConfig = field(default_factory=LinearSolveConfig)
    rho: float = 1.0
    kernel: ConvolutionKernel = field(init=False, repr=False)
    basis: PlaneWaveBasis = field(init=False, repr=False)

    def __post_init__(self):
        self.grid.check_field(self.contrast.support, "contrast support")
        if self.contrast.support.any() and 1.0 + self.contrast.q0_min() <= 0:
            raise InvariantViolationError(f"essinf(1 + q0) = {1.0 + self.contrast.q0_min():g} must be > 0")
        mode_matrix(self.quadrature, self.N)  # rejects M < 2N up front
        self.kernel = build_kernel(self.grid, self.k)
        self.basis = PlaneWaveBasis(self.grid, self.k, self.quadrature)

    def incident(self, g: Density) -> np.ndarray:
        """Herglotz wave Hg on the grid"""
        return self.basis.herglotz(evaluate_density(g, self.quadrature))

    def forward(self, ui: np.ndarray, tracer: Optional[RunTracer] = None) -> ForwardResult:
        return solve_nonlinear(self.kernel, self.contrast, ui, self.fixed_point, self.linear, tracer=tracer)

    def with_contrast(self, contrast: Contrast) -> "Scene":
        return Scene(self.grid, self.k, contrast, self.quadrature, self.N,
                     self.fixed_point, self.linear, self.rho)


def far_field_operator(g: Density, scene: Scene, tracer: Optional[RunTracer] = None) -> FarFieldPattern:
    """F(g): far field of the scattered wave for the incident field Hg."""
    ui = scene.incident(g)
    result = scene.forward(ui, tracer=tracer)
    return far_field(scene.kernel, scene.contrast, ui, result.u0s, result.w,
                     scene.quadrature, basis=scene.basis)


def linear_far_field_operator(g: Density, scene: Scene) -> FarFieldPattern:
    """F0(g) for the linearized medium q0"""
    q = scene.contrast.linear()
    ui = scene.incident(g)
    u0s = solve_linear(scene.kernel, q, ui, scene.linear)
    return far_field(scene.kernel, q, ui, u0s, np.zeros_like(u0s), scene.quadrature, basis=scene.basis)


def middle_operator(f: np.ndarray, scene: Scene) -> np.ndarray:
    """T(f) = k^2 q(|V(f) + f|)(V(f) + f) on D, so that F(g) = H* T(Hg)"""
    result = scene.forward(f)
    return contrast_source(scene.kernel, scene.contrast, f + result.scattered)


def linear_middle_operator(f: np.ndarray, scene: Scene) -> np.ndarray:
    """T0 f = k^2 q0 (f + V0 f)"""
    q = scene.contrast.linear()
    u0s = solve_linear(scene.kernel, q, f, scene.linear)
    return contrast_source(scene.kernel, q, f + u0s)


def linear_far_field_matrix(scene: Scene) -> np.ndarray:
    """
    F0 restricted to the N Fourier modes, as the N x N matrix A with
    A[m, n] = <F0 e_n, e_m>, e_n the normalized basis functions.
    """
    N = scene.N
    E = mode_matrix(scene.quadrature, N)
    A = np.empty((N, N), dtype=np.complex128)
    for col, n in enumerate(range(-N // 2, N // 2)):
        pattern = linear_far_field_operator(Density.mode(N, n), scene)
        A[:, col] = scene.quadrature.weight * (E.conj().T @ pattern.samples)
    return A


def leading_singular_vectors(scene: Scene, count: int) -> np.ndarray:
    """Columns span the `count` dominant right singular directions of the F0 matrix"""
    _, _, vh = np.linalg.svd(linear_far_field_matrix(scene))
    return vh[:count].conj().T


def homogeneous_scene(shape: Shape,
                      terms: Sequence[Tuple[float, float]],
                      R: float = 5.0,
                      J: int = 20,
                      k: float = 1.0,
                      M: int = 256,
                      N: int = 16,
                      rho: float = 1.0,
                      fixed_point: FixedPointConfig = FixedPointConfig(),
                      linear: LinearSolveConfig = LinearSolveConfig()) -> Scene:
    """Scene whose contrast terms are constants (value, exponent) on one shape, weighted by cell coverage"""
    grid = Grid2D(R=R, J=J)
    fraction = coverage(shape, grid)
    contrast = Contrast.from_terms([(value * fraction, exponent) for value, exponent in terms], fraction > 0)
    return Scene(grid, k, contrast, AngularQuadrature(M), N, fixed_point, linear, rho)
