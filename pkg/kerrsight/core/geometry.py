"""
Computation grids on [-R, R]^2 and scatterer shapes rasterized onto them.

Fields living on a grid are numpy arrays of shape (2J+1, 2J+1); entry
[i + J, j + J] holds the value at the lattice point (i*h, j*h).
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt

from kerrsight.core.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    ShapeOutOfBoundsError,
)

SupportMask = npt.NDArray[np.bool_]

KITE_SAMPLES = 720
COVERAGE_SUBSAMPLES = 16


@dataclass(frozen=True)
class Grid2D:
    """Equidistant (2J+1) x (2J+1) lattice z_ij = (i h, j h) with h = R/J"""
    R: float
    J: int

    def __post_init__(self):
        if not (isinstance(self.J, (int, np.integer)) and self.J >= 1):
            raise InvalidParameterError(f"grid half-count J must be an integer >= 1, got {self.J!r}")
        if not (np.isfinite(self.R) and self.R > 0):
            raise InvalidParameterError(f"grid half-width R must be > 0, got {self.R!r}")
        # store R so that h * J reproduces it exactly
        object.__setattr__(self, "J", int(self.J))
        object.__setattr__(self, "R", (float(self.R) / self.J) * self.J)

    @property
    def h(self) -> float:
        return self.R / self.J

    @property
    def n(self) -> int:
        """Points per axis"""
        return 2 * self.J + 1

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.J, self.J + 1)

    @property
    def axis(self) -> np.ndarray:
        return self.indices * self.h

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays X, Y with X[a, b] = axis[a], Y[a, b] = axis[b]"""
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def points(self) -> np.ndarray:
        """All lattice points as an (n*n, 2) array in row-major field order"""
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def index_of(self, i: int, j: int) -> Tuple[int, int]:
        """Array index of lattice point (i h, j h)"""
        return (i + self.J, j + self.J)

    def check_field(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        arr = np.asarray(values)
        if arr.shape != self.shape:
            raise DimensionMismatchError(
                f"{name} has shape {arr.shape}, grid expects {self.shape}"
            )
        return arr

    def zeros(self, dtype=np.complex128) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)


def build_grid(R: float, J: int) -> Grid2D:
    """Build the sampling/computation grid on [-R, R]^2 with step R/J."""
    return Grid2D(R=R, J=J)


class Shape(ABC):
    """A closed bounded region in the plane"""

    @abstractmethod
    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Boundary-inclusive membership test"""

    @abstractmethod
    def extent(self) -> float:
        """max(|x|, |y|) over the shape"""

    @abstractmethod
    def signed_distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Distance to the boundary, negative inside"""


@dataclass(frozen=True)
class Disk(Shape):
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameterError(f"disk radius must be > 0, got {self.radius}")

    def contains(self, x, y):
        return self.signed_distance(x, y) <= 1e-12 * self.radius

    def extent(self) -> float:
        cx, cy = self.center
        return max(abs(cx), abs(cy)) + self.radius

    def signed_distance(self, x, y):
        cx, cy = self.center
        return np.hypot(np.asarray(x) - cx, np.asarray(y) - cy) - self.radius


@dataclass(frozen=True)
class Polygon(Shape):
    vertices: Tuple[Tuple[float, float], ...]
    _vx: np.ndarray = field(init=False, repr=False, compare=False)
    _vy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise InvalidParameterError("polygon needs at least 3 (x, y) vertices")
        if np.allclose(verts[0], verts[-1]):
            verts = verts[:-1]
        vx, vy = verts[:, 0], verts[:, 1]
        area = 0.5 * np.sum(vx * np.roll(vy, -1) - np.roll(vx, -1) * vy)
        if abs(area) == 0.0:
            raise InvalidParameterError("polygon has zero area")
        if len(verts) <= 64 and _self_intersects(vx, vy):
            raise InvalidParameterError("polygon is not simple")
        object.__setattr__(self, "vertices", tuple(map(tuple, verts)))
        object.__setattr__(self, "_vx", vx)
        object.__setattr__(self, "_vy", vy)

    @property
    def _scale(self) -> float:
        return max(np.ptp(self._vx), np.ptp(self._vy))

    def contains(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        tol = 1e-12 * self._scale
        winding = np.zeros(x.shape, dtype=int)
        on_edge = np.zeros(x.shape, dtype=bool)
        x0, y0 = self._vx, self._vy
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        for ax, ay, bx, by in zip(x0, y0, x1, y1):
            ex, ey = bx - ax, by - ay
            is_left = ex * (y - ay) - (x - ax) * ey
            length2 = ex * ex + ey * ey
            along = (x - ax) * ex + (y - ay) * ey
            on_edge |= (np.abs(is_left) <= tol * np.sqrt(length2)) & (along >= -tol) & (along <= length2 + tol)
            up = (ay <= y) & (by > y) & (is_left > 0)
            down = (ay > y) & (by <= y) & (is_left < 0)
            winding += up.astype(int) - down.astype(int)
        return on_edge | (winding != 0)

    def extent(self) -> float:
        return float(max(np.abs(self._vx).max(), np.abs(self._vy).max()))

    def signed_distance(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        dist = np.full(x.shape, np.inf)
        x0, y0 = self._vx, self._vy
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        for ax, ay, bx, by in zip(x0, y0, x1, y1):
            ex, ey = bx - ax, by - ay
            t = np.clip(((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
            dist = np.minimum(dist, np.hypot(x - (ax + t * ex), y - (ay + t * ey)))
        return np.where(self.contains(x, y), -dist, dist)


@dataclass(frozen=True)
class Kite(Shape):
    """t -> center + scale * (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)"""
    center: Tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    _outline: Polygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidParameterError(f"kite scale must be > 0, got {self.scale}")
        t = np.linspace(0.0, 2 * np.pi, KITE_SAMPLES, endpoint=False)
        bx, by = self.boundary(t)
        object.__setattr__(self, "_outline", Polygon(tuple(zip(bx, by))))

    def boundary(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        cx, cy = self.center
        x = cx + self.scale * (np.cos(t) + 0.65 * np.cos(2 * t) - 0.65)
        y = cy + self.scale * 1.5 * np.sin(t)
        return x, y

    def contains(self, x, y):
        return self._outline.contains(x, y)

    def extent(self) -> float:
        return self._outline.extent()

    def signed_distance(self, x, y):
        return self._outline.signed_distance(x, y)


def _self_intersects(vx: np.ndarray, vy: np.ndarray) -> bool:
    n = len(vx)

    def cross(ox, oy, ax, ay, bx, by):
        return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)

    for a in range(n):
        p1, p2 = (vx[a], vy[a]), (vx[(a + 1) % n], vy[(a + 1) % n])
        for b in range(a + 2, n):
            if a == 0 and b == n - 1:
                continue
            q1, q2 = (vx[b], vy[b]), (vx[(b + 1) % n], vy[(b + 1) % n])
            d1 = cross(*q1, *q2, *p1)
            d2 = cross(*q1, *q2, *p2)
            d3 = cross(*p1, *p2, *q1)
            d4 = cross(*p1, *p2, *q2)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


def make_shape(kind: str, **params) -> Shape:
    """Build a shape from its configuration name and parameters"""
    if kind == "disk":
        return Disk(center=tuple(params.get("center", (0.0, 0.0))), radius=float(params["radius"]))
    if kind == "kite":
        return Kite(center=tuple(params.get("center", (0.0, 0.0))), scale=float(params.get("scale", 1.0)))
    if kind == "polygon":
        return Polygon(vertices=tuple(tuple(v) for v in params["vertices"]))
    raise InvalidParameterError(f"unknown shape kind {kind!r}")


def rasterize(shape: Shape, grid: Grid2D) -> SupportMask:
    """Mark the grid points inside the shape (boundary points count as inside)."""
    _check_extent(shape, grid)
    X, Y = grid.mesh()
    mask = np.asarray(shape.contains(X, Y), dtype=bool)
    _check_outer_ring(mask)
    return mask


def coverage(shape: Shape, grid: Grid2D, subsamples: int = COVERAGE_SUBSAMPLES) -> np.ndarray:
    """
    Fraction of each cell [x - h/2, x + h/2] x [y - h/2, y + h/2] covered by the shape.

    Cells farther than half a diagonal from the boundary are 0 or 1; the
    others are estimated from a subsamples x subsamples midpoint lattice.
    """
    if subsamples < 1:
        raise InvalidParameterError(f"subsamples must be >= 1, got {subsamples}")
    _check_extent(shape, grid)
    X, Y = grid.mesh()
    h = grid.h
    frac = np.asarray(shape.contains(X, Y), dtype=float)
    band = np.abs(shape.signed_distance(X, Y)) <= 0.75 * h
    if band.any():
        offsets = (np.arange(subsamples) + 0.5) / subsamples - 0.5
        ox, oy = (h * o.ravel() for o in np.meshgrid(offsets, offsets, indexing="ij"))
        bx = X[band][:, None] + ox[None, :]
        by = Y[band][:, None] + oy[None, :]
        frac[band] = np.asarray(shape.contains(bx, by), dtype=float).mean(axis=1)
    _check_outer_ring(frac > 0)
    return frac


def _check_extent(shape: Shape, grid: Grid2D) -> None:
    if not shape.extent() < grid.R:
        raise ShapeOutOfBoundsError(
            f"shape extends to {shape.extent():.6g}, must stay strictly inside [-{grid.R}, {grid.R}]^2"
        )


def _check_outer_ring(mask: np.ndarray) -> None:
    if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
        raise ShapeOutOfBoundsError("shape touches the outer ring of the grid")


def union_mask(masks: Sequence[SupportMask]) -> SupportMask:
    out = np.zeros_like(masks[0], dtype=bool)
    for m in masks:
        out |= m
    return out
