import textwrap

import numpy as np
import pytest

from kerrsight.core.geometry import Disk, Grid2D, Kite
from kerrsight.core.scene import homogeneous_scene


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-pipeline experiments (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    return Grid2D(R=5.0, J=10)


@pytest.fixture
def unit_disk():
    return Disk((0.0, 0.0), 1.0)


@pytest.fixture
def kerr_disk_scene(unit_disk):
    """Disk with q0 = 1.16, q1 = 0.26 |u|^2 on a coarse grid"""
    return homogeneous_scene(unit_disk, [(1.16, 0.0), (0.26, 2.0)], J=10, M=64, N=8)


@pytest.fixture
def linear_disk_scene(unit_disk):
    return homogeneous_scene(unit_disk, [(1.16, 0.0)], J=10, M=64, N=8)


@pytest.fixture
def kite_scene():
    return homogeneous_scene(Kite(), [(1.16, 0.0), (0.26, 2.0)], J=10, M=64, N=8, rho=0.2)


def scene_toml(J=8, R=4.0, M=32, N=8, q0=1.16, q1=0.26, shape='{ kind = "disk", radius = 1.0 }',
               amplitude=1.0, extra=""):
    """Small run configuration used by the config and CLI tests"""
    kerr = "" if q1 is None else f"""
        [[contrast.terms]]
        exponent = 2.0
        value = {q1}
        shape = {shape}
        """
    text = f"""
        [scene]
        wavenumber = 1.0

        [grid]
        R = {R}
        J = {J}

        [[contrast.terms]]
        exponent = 0.0
        value = {q0}
        shape = {shape}
        {kerr}
        [incident]
        direction = 0.0
        amplitude = {amplitude}

        [quadrature]
        M = {M}
        N = {N}
        """
    return textwrap.dedent(text) + textwrap.dedent(extra)


@pytest.fixture
def write_config(tmp_path):
    def write(name="scene.toml", **kwargs):
        path = tmp_path / name
        path.write_text(scene_toml(**kwargs))
        return path
    return write
