"""Shared fixtures: one small desk-scale discretization reused everywhere.

The small grid (Vmax=6, Nv=9) keeps the collision kernels fast enough
for per-module tests; resolution-sensitive assertions live in the
acceptance suite, which builds its own grids.
"""

import numpy as np
import pytest

from vmbolt.collision import build_workspace
from vmbolt.driver import RunConfig, build_model
from vmbolt.grid import build_sphere_quadrature, build_velocity_grid
from vmbolt.maxwellian import build_null_basis


@pytest.fixture(scope="session")
def vgrid9():
    return build_velocity_grid(6.0, 9)


@pytest.fixture(scope="session")
def basis9(vgrid9):
    return build_null_basis(vgrid9)


@pytest.fixture(scope="session")
def ws9(vgrid9):
    return build_workspace(vgrid9, build_sphere_quadrature(14), s_max=30.0)


@pytest.fixture(scope="session")
def small_cfg(tmp_path_factory):
    out = tmp_path_factory.mktemp("small-run")
    return RunConfig(vmax=6.0, nv=9, nx=8, steps=6, dt=0.05, s_max=30.0,
                     gamma_s_max=30.0, gamma_sphere_rule=6,
                     gamma_interp_order=1, report_interval=2,
                     outdir=str(out))


@pytest.fixture(scope="session")
def small_model(small_cfg):
    return build_model(small_cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
