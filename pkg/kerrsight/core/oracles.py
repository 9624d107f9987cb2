"""
Reference solutions for a homogeneous disk, independent of the volume
integral discretization.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import special

from kerrsight.core.errors import InvalidParameterError
from kerrsight.core.forward import Contrast, plane_wave, solve_linear
from kerrsight.core.geometry import Disk, Grid2D, coverage
from kerrsight.core.ls_kernel import LinearSolveConfig, build_kernel, cell_average, fundamental_solution

DISK_MODES = 40


@dataclass(frozen=True, eq=False)
class DiskTransmission:
    """
    Plane wave exp(i k x . d) on the disk |x - c| <= a with constant contrast
    q0, expanded in modes n = -modes..modes:

        inside:   u   = sum a_n J_n(k1 r) e^{in(phi - theta)},  k1 = k sqrt(1 + q0)
        outside:  u^s = sum b_n H_n(k r)  e^{in(phi - theta)}
    """
    k: float
    q0: float
    radius: float
    center: Tuple[float, float]
    direction: float
    orders: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def k1(self) -> float:
        return self.k * np.sqrt(1.0 + self.q0)

    def _incident_phase(self) -> complex:
        # plane wave referenced to the disk centre
        c = np.asarray(self.center)
        return np.exp(1j * self.k * (c[0] * np.cos(self.direction) + c[1] * np.sin(self.direction)))

    def scattered(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """u^s = u - u^i at arbitrary points"""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        r = np.hypot(x - self.center[0], y - self.center[1])
        phi = np.arctan2(y - self.center[1], x - self.center[0])
        inside = r <= self.radius
        n = self.orders[:, None]
        r_flat, phi_flat, inside_flat = r.ravel(), phi.ravel(), inside.ravel()
        angular = np.exp(1j * n * (phi_flat[None, :] - self.direction))
        incident_modes = (1j ** n) * special.jv(n, self.k * r_flat[None, :])
        interior = self.a[:, None] * special.jv(n, self.k1 * r_flat[None, :]) - incident_modes
        safe_r = np.where(inside_flat, self.radius, r_flat)
        exterior = self.b[:, None] * special.hankel1(n, self.k * safe_r[None, :])
        modes = np.where(inside_flat[None, :], interior, exterior)
        return (self._incident_phase() * np.sum(modes * angular, axis=0)).reshape(r.shape)

    def far_field(self, angles: np.ndarray) -> np.ndarray:
        """Far field normalized like the grid far field (no 1/sqrt(8 pi k) factor)"""
        angles = np.asarray(angles, dtype=float)
        n = self.orders[:, None]
        c = np.asarray(self.center)
        shift = np.exp(-1j * self.k * (c[0] * np.cos(angles) + c[1] * np.sin(angles)))
        series = np.sum(self.b[:, None] * (-1j) ** n * np.exp(1j * n * (angles[None, :] - self.direction)), axis=0)
        return -4j * self._incident_phase() * shift * series


def disk_transmission(k: float,
                      q0: float,
                      radius: float,
                      center: Sequence[float] = (0.0, 0.0),
                      direction: float = 0.0,
                      modes: int = DISK_MODES) -> DiskTransmission:
    """Match J_n / H_n^(1) coefficients across |x - c| = radius for each order."""
    if not (k > 0 and radius > 0):
        raise InvalidParameterError("disk oracle needs k > 0 and radius > 0")
    if not 1.0 + q0 > 0:
        raise InvalidParameterError(f"disk oracle needs 1 + q0 > 0, got q0 = {q0}")
    orders = np.arange(-modes, modes + 1)
    k1 = k * np.sqrt(1.0 + q0)
    ka, k1a = k * radius, k1 * radius
    a = np.empty(orders.size, dtype=np.complex128)
    b = np.empty(orders.size, dtype=np.complex128)
    if q0 == 0:
        return DiskTransmission(k, q0, radius, (float(center[0]), float(center[1])), direction, orders,
                                (1j ** orders).astype(np.complex128), np.zeros(orders.size, dtype=np.complex128))
    for idx, n in enumerate(orders):
        system = np.array([
            [special.jv(n, k1a), -special.hankel1(n, ka)],
            [k1 * special.jvp(n, k1a), -k * special.h1vp(n, ka)],
        ])
        rhs = (1j ** n) * np.array([special.jv(n, ka), k * special.jvp(n, ka)])
        a[idx], b[idx] = np.linalg.solve(system, rhs)
    return DiskTransmission(k, q0, radius, (float(center[0]), float(center[1])), direction, orders, a, b)


def disk_fourier_transform(xi: np.ndarray, radius: float, center: Sequence[float] = (0.0, 0.0)) -> np.ndarray:
    """int_{|y - c| <= r} exp(-i xi . y) dy = 2 pi r J1(r|xi|)/|xi| e^{-i xi . c}, pi r^2 at xi = 0"""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    norm = np.linalg.norm(xi, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    value = np.where(norm > 0, 2 * np.pi * radius * special.j1(radius * safe) / safe, np.pi * radius ** 2)
    return value * np.exp(-1j * (xi @ np.asarray(center, dtype=float)))


def born_disk_far_field(k: float, q0: float, radius: float, angles: np.ndarray,
                        direction: float = 0.0, center: Sequence[float] = (0.0, 0.0)) -> np.ndarray:
    """k^2 q0 times the disk Fourier transform at k (x_hat - theta)"""
    angles = np.asarray(angles, dtype=float)
    xi = k * np.column_stack([np.cos(angles) - np.cos(direction), np.sin(angles) - np.sin(direction)])
    return k ** 2 * q0 * disk_fourier_transform(xi, radius, center)


@dataclass(frozen=True)
class RefinementStudy:
    """Relative sup-norm errors of the grid solution at steps h and h/2"""
    error_h: float
    error_h_half: float
    h: float

    @property
    def ratio(self) -> float:
        if self.error_h_half == 0:
            return float("inf") if self.error_h > 0 else float("nan")
        return self.error_h / self.error_h_half

    def to_dict(self):
        return {"h": self.h, "error_h": self.error_h, "error_h_half": self.error_h_half, "ratio": self.ratio}


def disk_grid_error(k: float, q0: float, radius: float, R: float, J: int,
                    direction: float = 0.0, center: Sequence[float] = (0.0, 0.0),
                    lin: LinearSolveConfig = LinearSolveConfig()) -> float:
    """max |u0s - u^s_series| / max |u^s_series| over the grid, absolute if the series vanishes"""
    grid = Grid2D(R=R, J=J)
    disk = Disk((float(center[0]), float(center[1])), radius)
    fraction = coverage(disk, grid)
    contrast = Contrast.from_terms([(q0 * fraction, 0.0)], fraction > 0)
    kernel = build_kernel(grid, k)
    u0s = solve_linear(kernel, contrast, plane_wave(grid, k, direction), lin)
    X, Y = grid.mesh()
    exact = disk_transmission(k, q0, radius, center, direction).scattered(X, Y)
    scale = float(np.abs(exact).max())
    error = float(np.abs(u0s - exact).max())
    return error / scale if scale > 0 else error


def disk_refinement_study(k: float, q0: float, radius: float, R: float, J: int,
                          direction: float = 0.0, center: Sequence[float] = (0.0, 0.0),
                          lin: LinearSolveConfig = LinearSolveConfig()) -> RefinementStudy:
    """Compare the linear grid solution against the series at J and 2J."""
    coarse = disk_grid_error(k, q0, radius, R, J, direction, center, lin)
    fine = disk_grid_error(k, q0, radius, R, 2 * J, direction, center, lin)
    return RefinementStudy(coarse, fine, R / J)


def dense_linear_far_field(grid: Grid2D, k: float, q0: np.ndarray, support: np.ndarray,
                           angles: np.ndarray, incident: np.ndarray) -> np.ndarray:
    """
    Far field of the linear medium q0 from an explicit matrix solve on the
    support points, with the kernel entries evaluated one by one.

    incident holds the incident field at the support points in row-major
    grid order; the result is sampled at the given observation angles.
    """
    support = grid.check_field(support, "support").astype(bool)
    ys = grid.points()[support.ravel()]
    q = grid.check_field(q0, "q0")[support]
    distance = np.linalg.norm(ys[:, None, :] - ys[None, :, :], axis=-1)
    off_diagonal = ~np.eye(len(ys), dtype=bool)
    phi = np.full(distance.shape, cell_average(grid.h, k), dtype=np.complex128)
    phi[off_diagonal] = fundamental_solution(distance[off_diagonal], k)
    system = np.eye(len(ys)) - k ** 2 * grid.h ** 2 * phi * q[None, :]
    u = np.linalg.solve(system, np.asarray(incident, dtype=np.complex128))
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    return k ** 2 * grid.h ** 2 * np.exp(-1j * k * directions @ ys.T) @ (q * u)
