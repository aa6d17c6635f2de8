"""Reduced Maxwell stepping, constraints, and moment sources."""

import numpy as np
import pytest

from vmbolt.fields import (EMField, FieldError, check_constraints,
                           compute_charge_current, maxwell_cfl,
                           maxwell_energy, maxwell_step, solve_gauss,
                           zero_field)
from vmbolt.grid import build_spatial_grid
from vmbolt.maxwellian import sqrt_mu_table


def _grid(nx=64):
    return build_spatial_grid("periodic-1d", 2.0 * np.pi, nx)


def test_field_shape_validation():
    with pytest.raises(FieldError):
        EMField(e=np.zeros((3, 8)), b=np.zeros((2, 8)))


def test_vacuum_plane_wave_round_trip():
    """Right-moving wave E2 = B3 = cos(x - t) after one full period."""
    grid = _grid(64)
    x = grid.x
    e = np.zeros((3, grid.nx))
    b = np.zeros((3, grid.nx))
    e[1] = np.cos(x)
    b[2] = np.cos(x)
    fld = EMField(e=e.copy(), b=b.copy())
    steps = 160
    dt = 2.0 * np.pi / steps
    assert dt < maxwell_cfl(grid)
    j = np.zeros((3, grid.nx))
    for _ in range(steps):
        fld = maxwell_step(fld, j, dt, grid)
    err = max(np.max(np.abs(fld.e - e)), np.max(np.abs(fld.b - b)))
    assert err < 1e-3


def test_vacuum_invariant_exact(rng):
    grid = _grid(32)
    x = grid.x
    e = np.zeros((3, grid.nx))
    b = np.zeros((3, grid.nx))
    for k in (1, 2, 3):
        e[1] += rng.standard_normal() * np.cos(k * x)
        e[2] += rng.standard_normal() * np.sin(k * x)
        b[1] += rng.standard_normal() * np.cos(k * x)
        b[2] += rng.standard_normal() * np.sin(k * x)
    fld = EMField(e=e, b=b)
    j = np.zeros((3, grid.nx))
    dt = 0.8 * maxwell_cfl(grid)
    fld = maxwell_step(fld, j, dt, grid)      # stagger B first
    ref = maxwell_energy(fld, grid)
    for _ in range(200):
        fld = maxwell_step(fld, j, dt, grid)
        assert abs(maxwell_energy(fld, grid) - ref) < 1e-12 * abs(ref)


def test_b1_never_moves(rng):
    grid = _grid(16)
    e = rng.standard_normal((3, grid.nx))
    b = rng.standard_normal((3, grid.nx))
    fld = EMField(e=e, b=b)
    j = rng.standard_normal((3, grid.nx))
    for _ in range(5):
        fld = maxwell_step(fld, j, 0.5 * maxwell_cfl(grid), grid)
    assert np.array_equal(fld.b[0], b[0])


def test_divb_residual_zero_for_constant_b1():
    grid = _grid(16)
    fld = zero_field(grid)
    rep = check_constraints(fld, np.zeros(grid.nx), grid)
    assert rep.div_b_residual == 0.0
    assert rep.gauss_residual == 0.0


def test_cfl_rejection():
    grid = _grid(16)
    with pytest.raises(FieldError):
        maxwell_step(zero_field(grid), np.zeros((3, grid.nx)),
                     2.0 * maxwell_cfl(grid), grid)


def test_gauss_solve_oracle():
    grid = _grid(32)
    rho = np.cos(grid.x)
    e1 = solve_gauss(rho, grid)
    assert np.max(np.abs(e1 - np.sin(grid.x))) < 1e-12
    # solution satisfies the constraint as computed by the checker
    fld = EMField(e=np.stack([e1, 0 * e1, 0 * e1]),
                  b=np.zeros((3, grid.nx)))
    rep = check_constraints(fld, rho, grid)
    assert rep.gauss_residual < 1e-12


def test_gauss_rejects_net_charge():
    grid = _grid(16)
    with pytest.raises(FieldError):
        solve_gauss(np.ones(grid.nx), grid)


def test_charge_current_oracle(vgrid9):
    from vmbolt.maxwellian import build_null_basis
    basis = build_null_basis(vgrid9)
    smu = sqrt_mu_table(vgrid9)
    v1 = vgrid9.nodes[:, 0]
    f = np.zeros((2, vgrid9.n_nodes, 4))
    f[0] = (v1 * smu)[:, None]
    cc = compute_charge_current(f, vgrid9, basis)
    # <v1^2 mu> = 1 and all odd moments vanish on the symmetric lattice
    assert np.max(np.abs(cc.rho)) < 1e-10
    assert np.max(np.abs(cc.j[0] - 1.0)) < 5e-3
    assert np.max(np.abs(cc.j[1:])) < 1e-10


def test_current_equals_micro_current(vgrid9, basis9, rng):
    """The hydrodynamic part of f+ - f- carries no current."""
    smu = sqrt_mu_table(vgrid9)
    f = rng.standard_normal((2, vgrid9.n_nodes, 3)) * smu[:, None]
    cc = compute_charge_current(f, vgrid9, basis9)
    scale = np.max(np.abs(cc.j)) + 1e-300
    assert np.max(np.abs(cc.j - cc.j_micro)) / scale < 1e-10
