import numpy as np
import pandas as pd
import pytest

from kerrsight.core.errors import ConfigParseError, DimensionMismatchError
from kerrsight.core.geometry import Grid2D
from kerrsight.core.herglotz import Density
from kerrsight.core.output import (
    heatmap_bytes,
    read_density_csv,
    read_field_csv,
    read_pgm,
    read_raster_csv,
    write_convergence_csv,
    write_density_csv,
    write_far_field_csv,
    write_field_csv,
    write_indicator_csv,
    write_pgm,
)


def test_density_file_is_bit_exact(tmp_path, rng):
    g = Density(rng.standard_normal(16) / 3 + 1j * rng.standard_normal(16) / 7)
    path = write_density_csv(tmp_path / "g.csv", g)
    assert list(pd.read_csv(path).columns) == ["n", "Re", "Im"]
    np.testing.assert_array_equal(read_density_csv(path).coeffs, g.coeffs)


def test_density_modes_must_be_complete(tmp_path):
    pd.DataFrame({"n": [0, 1, 2], "Re": [1.0, 0.0, 0.0], "Im": [0.0, 0.0, 0.0]}).to_csv(tmp_path / "g.csv", index=False)
    with pytest.raises(ConfigParseError):
        read_density_csv(tmp_path / "g.csv")
    with pytest.raises(ConfigParseError):
        read_density_csv(tmp_path / "missing.csv")


def test_field_file(tmp_path, rng):
    grid = Grid2D(R=2.0, J=4)
    values = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    path = write_field_csv(tmp_path / "u.csv", grid, values)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["i", "j", "x", "y", "Re", "Im"]
    assert len(frame) == grid.n ** 2
    row = frame[(frame.i == 2) & (frame.j == -1)].iloc[0]
    assert (row.x, row.y) == (2 * grid.h, -grid.h)
    np.testing.assert_array_equal(read_field_csv(path, grid), values)
    with pytest.raises(DimensionMismatchError):
        write_field_csv(tmp_path / "bad.csv", grid, np.zeros((3, 3)))


def test_far_field_and_convergence_files(tmp_path):
    angles = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    frame = pd.read_csv(write_far_field_csv(tmp_path / "ff.csv", angles, np.exp(1j * angles)))
    assert list(frame.columns) == ["phi", "Re", "Im"] and len(frame) == 8
    frame = pd.read_csv(write_convergence_csv(tmp_path / "conv.csv", [1.0, 0.1, 1e-6]))
    assert list(frame.sweep) == [1, 2, 3]


def test_indicator_file(tmp_path):
    grid = Grid2D(R=1.0, J=1)
    values = np.arange(9.0).reshape(3, 3)
    values[1, 1] = np.nan
    status = np.full(grid.shape, "ok", dtype=object)
    status[1, 1] = "no_contraction"
    path = write_indicator_csv(tmp_path / "ind.csv", grid, values, np.ones(grid.shape, dtype=int), status)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["i", "j", "x", "y", "value", "evals", "status"]
    assert frame.status.tolist().count("no_contraction") == 1
    assert frame.value.isna().sum() == 1


def test_raster_indices_checked(tmp_path):
    grid = Grid2D(R=1.0, J=2)
    pd.DataFrame({"i": [0, 3], "j": [0, 0], "value": [1.0, 2.0]}).to_csv(tmp_path / "r.csv", index=False)
    with pytest.raises(DimensionMismatchError):
        read_raster_csv(tmp_path / "r.csv", grid)


def test_heatmap_orientation_and_scaling():
    values = np.zeros((5, 5))
    values[0, -1] = 2.0   # i = -J, j = +J
    values[2, 2] = np.nan
    pixels, vmin, vmax = heatmap_bytes(values)
    assert pixels[0, 0] == 255
    assert pixels.sum() == 255
    assert (vmin, vmax) == (0.0, 2.0)


def test_flat_heatmap():
    pixels, vmin, vmax = heatmap_bytes(np.full((3, 3), 0.7))
    assert not pixels.any()
    assert vmin == vmax == 0.7


def test_pgm_file(tmp_path, rng):
    values = rng.standard_normal((9, 9))
    path = write_pgm(tmp_path / "map.pgm", values)
    assert path.read_bytes().startswith(b"P5\n9 9\n255\n")
    np.testing.assert_array_equal(read_pgm(path), heatmap_bytes(values)[0])
    scale = (tmp_path / "map.scale.txt").read_text()
    assert scale.startswith("min ") and "max " in scale
