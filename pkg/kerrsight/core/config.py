"""
TOML run configuration.

The pydantic models check structure and types only (a failure here is a
parse error); value ranges are enforced by the domain objects the
configuration is turned into, which raise invariant errors.
"""

import logging
import tomllib
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from kerrsight.core.errors import ConfigParseError, InvalidParameterError
from kerrsight.core.forward import Contrast, FixedPointConfig, plane_wave
from kerrsight.core.geometry import Grid2D, Shape, coverage, make_shape, union_mask
from kerrsight.core.herglotz import AngularQuadrature, Density
from kerrsight.core.ls_kernel import LinearSolveConfig
from kerrsight.core.output import read_density_csv, read_raster_csv
from kerrsight.core.reconstruction import ObjectiveKind, OptimizerConfig, ShiftSet
from kerrsight.core.scene import Scene

log = logging.getLogger(__name__)


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SceneSection(Section):
    wavenumber: float = 1.0
    rescale_tau: Optional[float] = None


class GridSection(Section):
    R: float = 5.0
    J: int = 20


class ShapeSection(Section):
    kind: Literal["disk", "kite", "polygon"]
    center: Tuple[float, float] = (0.0, 0.0)
    radius: Optional[float] = None
    scale: Optional[float] = None
    vertices: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def _parameters_present(self):
        if self.kind == "disk" and self.radius is None:
            raise ValueError("disk shape needs a radius")
        if self.kind == "polygon" and self.vertices is None:
            raise ValueError("polygon shape needs vertices")
        return self

    def build(self) -> Shape:
        params = {"center": self.center}
        if self.radius is not None:
            params["radius"] = self.radius
        if self.scale is not None:
            params["scale"] = self.scale
        if self.vertices is not None:
            params["vertices"] = self.vertices
        return make_shape(self.kind, **params)


class TermSection(Section):
    exponent: float
    value: Optional[float] = None
    raster: Optional[str] = None
    shape: Optional[ShapeSection] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.value is None) == (self.raster is None):
            raise ValueError("contrast term needs exactly one of 'value' or 'raster'")
        if self.value is not None and self.shape is None:
            raise ValueError("a constant contrast term needs a 'shape'")
        return self


class ContrastSection(Section):
    terms: List[TermSection]


class IncidentSection(Section):
    direction: float = 0.0
    amplitude: float = 1.0
    density: Optional[str] = None


class QuadratureSection(Section):
    M: int = 256
    N: int = 16


class FixedPointSection(Section):
    tolerance: float = 1e-5
    max_sweeps: int = 100


class LinearSolverSection(Section):
    tolerance: float = 1e-10
    max_iterations: int = 2000
    restart: int = 50


class ReconstructionSection(Section):
    kind: Literal["factorization", "monotonicity", "both"] = "both"
    rho: float = 1.0
    max_evals: int = 400
    fd_step: Optional[float] = None
    shift_stride: int = 1
    shifts: Literal["grid", "self"] = "grid"


class RunSection(Section):
    output_dir: str = "kerrsight_out"
    seed: int = 0
    threads: int = 1


class RunConfig(Section):
    scene: SceneSection = SceneSection()
    grid: GridSection = GridSection()
    contrast: ContrastSection
    incident: IncidentSection = IncidentSection()
    quadrature: QuadratureSection = QuadratureSection()
    fixed_point: FixedPointSection = FixedPointSection()
    linear_solver: LinearSolverSection = LinearSolverSection()
    reconstruction: ReconstructionSection = ReconstructionSection()
    run: RunSection = RunSection()

    # directory relative paths (rasters, densities) are resolved against
    base_dir: Path = Path(".")

    @property
    def tau(self) -> float:
        tau = self.scene.rescale_tau
        if tau is None:
            return 1.0
        if not tau > 0:
            raise InvalidParameterError(f"rescale_tau must be > 0, got {tau}")
        return tau

    def resolve(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    def build_grid(self) -> Grid2D:
        return Grid2D(R=self.grid.R, J=self.grid.J)

    def build_contrast(self, grid: Grid2D) -> Contrast:
        """Physical coefficients, before rescaling"""
        masks, fields, exponents = [], [], []
        for term in self.contrast.terms:
            if term.raster is not None:
                coefficient = read_raster_csv(self.resolve(term.raster), grid)
                mask = coefficient != 0
                if term.shape is not None:
                    mask = mask | (coverage(term.shape.build(), grid) > 0)
            else:
                fraction = coverage(term.shape.build(), grid)
                mask = fraction > 0
                coefficient = term.value * fraction
            masks.append(mask)
            fields.append(coefficient)
            exponents.append(term.exponent)
        support = union_mask(masks)
        return Contrast.from_terms(list(zip(fields, exponents)), support)

    def build_scene(self) -> Scene:
        grid = self.build_grid()
        tau = self.tau
        contrast = self.build_contrast(grid)
        if tau != 1.0:
            contrast = contrast.rescaled(tau)
            log.info("rescaled by tau = %g: coefficients scaled by tau^alpha, rho and amplitude by 1/tau", tau)
        return Scene(
            grid=grid,
            k=self.scene.wavenumber,
            contrast=contrast,
            quadrature=AngularQuadrature(self.quadrature.M),
            N=self.quadrature.N,
            fixed_point=FixedPointConfig(self.fixed_point.tolerance, self.fixed_point.max_sweeps),
            linear=LinearSolveConfig(self.linear_solver.tolerance, self.linear_solver.max_iterations,
                                     self.linear_solver.restart),
            rho=self.reconstruction.rho / tau,
        )

    def build_incident(self, scene: Scene, density: Optional[Union[str, Path]] = None,
                       direction: Optional[float] = None) -> np.ndarray:
        """Plane wave from [incident] or a Herglotz wave from a density file, in rescaled units"""
        density = density if density is not None else self.incident.density
        if density is not None:
            g = self.read_density(density)
            return scene.incident(g)
        angle = self.incident.direction if direction is None else direction
        return plane_wave(scene.grid, scene.k, angle, self.incident.amplitude / self.tau)

    def read_density(self, path: Union[str, Path]) -> Density:
        """Density file in physical units, returned rescaled"""
        g = read_density_csv(self.resolve(path))
        return g.scaled(1.0 / self.tau) if self.tau != 1.0 else g

    def optimizer(self) -> OptimizerConfig:
        rho = self.reconstruction.rho / self.tau
        fd_step = self.reconstruction.fd_step
        return OptimizerConfig(rho=rho,
                               fd_step=None if fd_step is None else fd_step / self.tau,
                               max_evals=self.reconstruction.max_evals)

    def objective_kinds(self) -> List[ObjectiveKind]:
        if self.reconstruction.kind == "both":
            return [ObjectiveKind.FACTORIZATION, ObjectiveKind.MONOTONICITY]
        return [ObjectiveKind(self.reconstruction.kind)]

    @property
    def shift_set(self) -> ShiftSet:
        return ShiftSet(self.reconstruction.shifts)


def parse_config(text: str, base_dir: Union[str, Path] = ".") -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"invalid TOML: {exc}") from exc
    if "base_dir" in data:
        raise ConfigParseError("'base_dir' is not a configuration key")
    try:
        return RunConfig.model_validate({**data, "base_dir": Path(base_dir)})
    except ValidationError as exc:
        raise ConfigParseError(f"invalid configuration:\n{exc}") from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)
