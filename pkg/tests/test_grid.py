"""Velocity lattice, sphere quadrature and spatial grid."""

import numpy as np
import pytest

from vmbolt.grid import (GridError, build_spatial_grid, build_sphere_quadrature,
                         build_velocity_grid, integrate_v)
from vmbolt.maxwellian import mu_table


def test_velocity_grid_basics(vgrid9):
    g = vgrid9
    assert g.n_nodes == 9 ** 3
    # midpoint lattice: a node sits exactly at the origin
    assert np.min(np.sum(g.nodes ** 2, axis=1)) == 0.0
    assert np.isclose(np.sum(g.weights), (2 * g.vmax) ** 3, rtol=1e-13)


def test_velocity_grid_rejects_even_nv():
    with pytest.raises(GridError):
        build_velocity_grid(6.0, 8)


def test_maxwellian_mass():
    # oracle: the continuum integral of the equilibrium is exactly 1.  The
    # midpoint rule on a Gaussian converges spectrally; Poisson summation
    # puts the aliasing floor at 2 exp(-2 pi^2 / dv^2) per axis, about
    # 1.3e-9 for dv = 16/17 and below round-off for dv = 16/25.
    g = build_velocity_grid(8.0, 17)
    assert abs(integrate_v(mu_table(g), g) - 1.0) < 1e-8
    g = build_velocity_grid(8.0, 25)
    assert abs(integrate_v(mu_table(g), g) - 1.0) < 1e-12


@pytest.mark.parametrize("rule", [6, 14, 26])
def test_sphere_rule_moments(rule):
    """Oracle: analytic moments of the unit sphere.

    The rule carries the raw surface measure (total weight 4 pi); divide
    it out to compare against averaged moments.
    """
    q = build_sphere_quadrature(rule)
    d = q.directions
    w = q.weights / (4.0 * np.pi)
    assert np.isclose(np.sum(w), 1.0, atol=1e-14)
    # odd moments vanish by octahedral symmetry
    assert np.max(np.abs(w @ d)) < 1e-15
    # second moments: <omega_i omega_j> = delta_ij / 3
    second = np.einsum("k,ki,kj->ij", w, d, d)
    assert np.max(np.abs(second - np.eye(3) / 3.0)) < 1e-14
    if rule >= 14:
        # fourth moments: <omega_i^4> = 1/5, <omega_i^2 omega_j^2> = 1/15
        fourth = w @ d ** 4
        assert np.max(np.abs(fourth - 0.2)) < 1e-14
        mixed = np.einsum("k,ki,kj->ij", w, d ** 2, d ** 2)
        assert abs(mixed[0, 1] - 1.0 / 15.0) < 1e-14


def test_sphere_rule_unknown():
    with pytest.raises(GridError):
        build_sphere_quadrature(7)


def test_spatial_spectral_derivative():
    sg = build_spatial_grid("periodic-1d", 2.0 * np.pi, 32)
    u = np.sin(3.0 * sg.x)
    # oracle: d/dx sin(3x) = 3 cos(3x), exact for a resolved mode
    assert np.max(np.abs(sg.derivative(u) - 3.0 * np.cos(3.0 * sg.x))) < 1e-12
    assert np.isclose(sg.integrate(np.cos(sg.x) ** 2), np.pi, atol=1e-12)


def test_homogeneous_grid():
    sg = build_spatial_grid("homogeneous-0d")
    assert sg.nx == 1
    assert np.all(sg.derivative(np.ones(1)) == 0.0)
