"""Reduced 1-D Maxwell evolution, charge/current moments and constraints.

The spatial reduction keeps all six field components but only the x1
dependence, so the curl system splits into

    dE1/dt = -J1                 dB1/dt = 0
    dE2/dt = -dx B3 - J2         dB2/dt =  dx E3
    dE3/dt =  dx B2 - J3         dB3/dt = -dx E2

with spectral d/dx.  Time stepping is leapfrog: B lives on half steps
internally and is resynchronized, so a step is a pure map field -> field.
The staggered quadratic invariant (|E|^2 integrated plus the product of
the two half-step B values) is conserved to round-off in vacuum;
``maxwell_energy`` evaluates it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import SpatialGrid, VelocityGrid, integrate_v
from .maxwellian import NullBasis, micro_part, sqrt_mu_table


class FieldError(ValueError):
    """Invalid field configuration or step parameters."""


@dataclass(frozen=True)
class EMField:
    """Electromagnetic state on the spatial grid.

    ``e`` and ``b`` (each (3, nx)) are synchronized at the current time;
    ``b_lag`` is the half-step-behind B of the leapfrog (equal to ``b``
    for freshly initialized data).
    """

    e: np.ndarray
    b: np.ndarray
    b_lag: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.b_lag is None:
            object.__setattr__(self, "b_lag", self.b.copy())
        for name in ("e", "b", "b_lag"):
            arr = getattr(self, name)
            if arr.shape != self.e.shape or arr.ndim != 2 or arr.shape[0] != 3:
                raise FieldError(f"{name} must have shape (3, nx)")


def zero_field(grid: SpatialGrid) -> EMField:
    z = np.zeros((3, grid.nx))
    return EMField(e=z.copy(), b=z.copy())


@dataclass(frozen=True)
class ChargeCurrent:
    """Charge density and current; j_micro is the current recomputed from
    the microscopic part alone (the hydrodynamic contribution to J of the
    difference moment vanishes, so the two must agree)."""

    rho: np.ndarray            # (nx,)
    j: np.ndarray              # (3, nx)
    j_micro: np.ndarray        # (3, nx)


def compute_charge_current(f: np.ndarray, vgrid: VelocityGrid,
                           basis: NullBasis) -> ChargeCurrent:
    """Moments rho = <sqrt(mu)(f+ - f-)>, J = <v sqrt(mu)(f+ - f-)>.

    f: (2, n_nodes, nx).
    """
    smu = sqrt_mu_table(vgrid)
    diff = smu[:, None] * (f[0] - f[1])                 # (n, nx)
    rho = integrate_v(diff, vgrid)
    j = np.stack([integrate_v(vgrid.nodes[:, i, None] * diff, vgrid)
                  for i in range(3)])
    fm = micro_part(f, basis)
    diff_m = smu[:, None] * (fm[0] - fm[1])
    j_micro = np.stack([integrate_v(vgrid.nodes[:, i, None] * diff_m, vgrid)
                        for i in range(3)])
    return ChargeCurrent(rho=rho, j=j, j_micro=j_micro)


def maxwell_cfl(grid: SpatialGrid) -> float:
    """Largest stable dt for the spectral leapfrog: (2/pi) * dx."""
    return (2.0 / np.pi) * grid.dx


def maxwell_step(fld: EMField, j: np.ndarray, dt: float,
                 grid: SpatialGrid) -> EMField:
    """One leapfrog step of the reduced system with current density j (3, nx).

    The current is treated as constant over the step (supplied at the
    half step by the caller for second order).
    """
    if dt > maxwell_cfl(grid) * (1.0 + 1e-12):
        raise FieldError(
            f"dt = {dt} exceeds the spectral leapfrog limit {maxwell_cfl(grid)}")
    dx = grid.derivative
    e, b = fld.e, fld.b
    b_half = b.copy()
    b_half[1] += 0.5 * dt * dx(e[2])
    b_half[2] -= 0.5 * dt * dx(e[1])
    e_new = e.copy()
    e_new[0] += dt * (-j[0])
    e_new[1] += dt * (-dx(b_half[2]) - j[1])
    e_new[2] += dt * (dx(b_half[1]) - j[2])
    b_new = b_half.copy()
    b_new[1] += 0.5 * dt * dx(e_new[2])
    b_new[2] -= 0.5 * dt * dx(e_new[1])
    return EMField(e=e_new, b=b_new, b_lag=b_half)


def maxwell_energy(fld: EMField, grid: SpatialGrid) -> float:
    """Staggered field energy, exactly conserved by vacuum leapfrog steps.

    Integral of |E|^2 + B(t-dt/2).B(t+dt/2), with B(t+dt/2) = 2B - B_lag
    by the resynchronization identity.  Coincides with the plain energy
    for synchronized (fresh) data.
    """
    b_ahead = 2.0 * fld.b - fld.b_lag
    dens = np.sum(fld.e ** 2, axis=0) + np.sum(fld.b_lag * b_ahead, axis=0)
    return float(grid.integrate(dens))


@dataclass(frozen=True)
class ConstraintReport:
    gauss_residual: float      # max |dx E1 - rho|
    div_b_residual: float      # max |dx B1|


def check_constraints(fld: EMField, rho: np.ndarray,
                      grid: SpatialGrid) -> ConstraintReport:
    gauss = grid.derivative(fld.e[0]) - rho
    divb = grid.derivative(fld.b[0])
    return ConstraintReport(gauss_residual=float(np.max(np.abs(gauss))),
                            div_b_residual=float(np.max(np.abs(divb))))


def solve_gauss(rho: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """E1 with dx E1 = rho on the periodic interval (zero-mean E1 gauge).

    Periodic solvability needs a zero-mean rho; rejects otherwise.
    """
    mean = float(np.mean(rho))
    scale = float(np.max(np.abs(rho))) or 1.0
    if abs(mean) > 1e-12 * scale:
        raise FieldError(
            f"Gauss law unsolvable on a periodic domain: mean charge {mean}")
    k = grid.wavenumbers
    rhat = np.fft.fft(rho - mean)
    ehat = np.zeros_like(rhat)
    ehat[1:] = rhat[1:] / (1j * k[1:])
    return np.real(np.fft.ifft(ehat))
