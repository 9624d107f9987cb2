"""
File formats: CSV fields, far field patterns, densities, indicator maps and
8-bit PGM heatmaps with a sidecar scale file.
"""

from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from kerrsight.core.errors import ConfigParseError, DimensionMismatchError
from kerrsight.core.geometry import Grid2D
from kerrsight.core.herglotz import Density

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def _grid_frame(grid: Grid2D) -> pd.DataFrame:
    I, Jdx = np.meshgrid(grid.indices, grid.indices, indexing="ij")
    X, Y = grid.mesh()
    return pd.DataFrame({"i": I.ravel(), "j": Jdx.ravel(), "x": X.ravel(), "y": Y.ravel()})


def _write(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def _read(path: PathLike, columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigParseError(f"{path} lacks columns {missing}")
    return frame


def write_field_csv(path: PathLike, grid: Grid2D, values: np.ndarray) -> Path:
    """One row per grid point: i, j, x, y, Re, Im"""
    values = grid.check_field(values).ravel()
    frame = _grid_frame(grid)
    frame["Re"] = values.real
    frame["Im"] = values.imag
    return _write(frame, path)


def read_field_csv(path: PathLike, grid: Grid2D) -> np.ndarray:
    frame = _read(path, ["i", "j", "Re", "Im"])
    out = grid.zeros()
    out[frame["i"].to_numpy() + grid.J, frame["j"].to_numpy() + grid.J] = frame["Re"].to_numpy() + 1j * frame["Im"].to_numpy()
    return out


def write_far_field_csv(path: PathLike, angles: np.ndarray, samples: np.ndarray) -> Path:
    return _write(pd.DataFrame({"phi": angles, "Re": samples.real, "Im": samples.imag}), path)


def write_density_csv(path: PathLike, g: Density) -> Path:
    """Coefficients at 17 significant digits so reading them back is bit-exact"""
    return _write(pd.DataFrame({"n": g.modes, "Re": g.coeffs.real, "Im": g.coeffs.imag}), path)


def read_density_csv(path: PathLike) -> Density:
    frame = _read(path, ["n", "Re", "Im"]).sort_values("n")
    modes = frame["n"].to_numpy()
    N = len(modes)
    if N % 2 or not np.array_equal(modes, np.arange(-N // 2, N // 2)):
        raise ConfigParseError(f"{path}: modes must run from -N/2 to N/2-1 for even N")
    return Density(frame["Re"].to_numpy() + 1j * frame["Im"].to_numpy())


def read_raster_csv(path: PathLike, grid: Grid2D) -> np.ndarray:
    """Real coefficient raster with columns i, j, value; missing points are zero"""
    frame = _read(path, ["i", "j", "value"])
    i = frame["i"].to_numpy()
    j = frame["j"].to_numpy()
    if np.any(np.abs(i) > grid.J) or np.any(np.abs(j) > grid.J):
        raise DimensionMismatchError(f"{path}: raster indices exceed the grid half-count J = {grid.J}")
    out = np.zeros(grid.shape)
    out[i + grid.J, j + grid.J] = frame["value"].to_numpy(dtype=float)
    return out


def write_indicator_csv(path: PathLike, grid: Grid2D, values: np.ndarray,
                        evals: np.ndarray, status: np.ndarray) -> Path:
    frame = _grid_frame(grid)
    frame["value"] = grid.check_field(values).ravel()
    frame["evals"] = grid.check_field(evals).ravel()
    frame["status"] = grid.check_field(status).ravel()
    return _write(frame, path)


def write_convergence_csv(path: PathLike, increments) -> Path:
    return _write(pd.DataFrame({"sweep": np.arange(1, len(increments) + 1), "increment": increments}), path)


def heatmap_bytes(values: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """
    Min-max normalize to 0..255 as an image whose top row is j = +J and whose
    columns run over i. Non-finite entries map to 0. Returns (pixels, vmin, vmax).
    """
    image = np.asarray(values, dtype=float).T[::-1, :]
    finite = np.isfinite(image)
    if not finite.any():
        return np.zeros(image.shape, dtype=np.uint8), float("nan"), float("nan")
    vmin, vmax = float(image[finite].min()), float(image[finite].max())
    span = vmax - vmin
    scaled = np.zeros(image.shape)
    if span > 0:
        scaled[finite] = (image[finite] - vmin) / span
    pixels = np.clip(np.rint(scaled * 255), 0, 255).astype(np.uint8)
    return pixels, vmin, vmax


def write_pgm(path: PathLike, values: np.ndarray, scale_path: Optional[PathLike] = None) -> Path:
    """P5 binary graymap plus a '<name>.scale.txt' sidecar with the value range"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels, vmin, vmax = heatmap_bytes(values)
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    scale_path = Path(scale_path) if scale_path else path.with_suffix(".scale.txt")
    scale_path.write_text(f"min {vmin!r}\nmax {vmax!r}\n")
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    header = data.split(b"\n", 3)
    if header[0] != b"P5":
        raise ConfigParseError(f"{path} is not a binary PGM")
    width, height = map(int, header[1].split())
    return np.frombuffer(header[3], dtype=np.uint8).reshape(height, width)
