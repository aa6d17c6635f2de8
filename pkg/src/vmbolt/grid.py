"""Velocity-space and position-space grids with their quadrature rules.

The velocity grid is a uniform midpoint lattice on the truncated cube
[-Vmax, Vmax]^3.  All velocity integrals in the code are plain weighted
sums over this lattice, so symmetry properties (odd integrands vanish
exactly) hold to round-off by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Invalid grid or quadrature configuration."""


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint lattice on [-Vmax, Vmax]^3.

    Nodes sit at -Vmax + (i + 1/2) * dv with dv = 2 * Vmax / Nv, so an odd
    Nv places a node exactly at the origin and the lattice is symmetric
    under v -> -v.  Every node carries the same weight dv^3.
    """

    vmax: float
    nv: int
    axis: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)      # (Nv^3, 3)
    weights: np.ndarray = field(repr=False)    # (Nv^3,)

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.nv

    @property
    def n_nodes(self) -> int:
        return self.nv ** 3

    @property
    def speed_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.nodes, self.nodes)

    def reshape(self, values: np.ndarray) -> np.ndarray:
        """View a flat per-node array as an (Nv, Nv, Nv) cube."""
        return np.asarray(values).reshape(self.nv, self.nv, self.nv)


def build_velocity_grid(vmax: float, nv: int) -> VelocityGrid:
    """Build the truncated velocity lattice with its quadrature weights."""
    if vmax <= 0:
        raise GridError(f"vmax must be positive, got {vmax}")
    if nv < 3 or nv % 2 == 0:
        raise GridError(f"nv must be odd and >= 3, got {nv}")
    dv = 2.0 * vmax / nv
    axis = -vmax + (np.arange(nv) + 0.5) * dv
    # exact zero at the center node
    axis[nv // 2] = 0.0
    v1, v2, v3 = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.stack([v1.ravel(), v2.ravel(), v3.ravel()], axis=1)
    weights = np.full(nv ** 3, dv ** 3)
    return VelocityGrid(vmax=float(vmax), nv=int(nv), axis=axis,
                        nodes=nodes, weights=weights)


def integrate_v(values: np.ndarray, grid: VelocityGrid) -> float | np.ndarray:
    """Quadrature of a per-node sampled function over velocity space.

    ``values`` may carry extra trailing axes; the node axis must come first.
    """
    values = np.asarray(values)
    if values.shape[0] != grid.n_nodes:
        raise GridError(
            f"values have {values.shape[0]} entries, grid has {grid.n_nodes} nodes")
    out = np.tensordot(grid.weights, values, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SphereQuadrature:
    """Quadrature rule on the unit sphere (directions + positive weights)."""

    order: int
    directions: np.ndarray = field(repr=False)  # (M, 3)
    weights: np.ndarray = field(repr=False)     # (M,)

    @property
    def n_points(self) -> int:
        return len(self.weights)


# Octahedrally symmetric rules.  Point groups: vertices of the octahedron
# (a), cube corners (c), edge midpoints (b).  Weights are fractions of the
# full solid angle 4*pi; polynomial exactness degrees are 3 / 5 / 7.
_SPHERE_RULES = {
    6: (("a", 1.0 / 6.0),),
    14: (("a", 1.0 / 15.0), ("c", 3.0 / 40.0)),
    26: (("a", 1.0 / 21.0), ("b", 4.0 / 105.0), ("c", 9.0 / 280.0)),
}


def _octahedral_points(group: str) -> np.ndarray:
    if group == "a":
        pts = []
        for i in range(3):
            for s in (1.0, -1.0):
                p = np.zeros(3)
                p[i] = s
                pts.append(p)
        return np.array(pts)
    if group == "b":
        r = 1.0 / np.sqrt(2.0)
        pts = []
        for i in range(3):
            for j in range(i + 1, 3):
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        p = np.zeros(3)
                        p[i] = si * r
                        p[j] = sj * r
                        pts.append(p)
        return np.array(pts)
    if group == "c":
        r = 1.0 / np.sqrt(3.0)
        return np.array([[sx * r, sy * r, sz * r]
                         for sx in (1.0, -1.0)
                         for sy in (1.0, -1.0)
                         for sz in (1.0, -1.0)])
    raise GridError(f"unknown point group {group!r}")


def build_sphere_quadrature(order: int) -> SphereQuadrature:
    """Build the sphere rule with the given number of points (6, 14 or 26)."""
    if order not in _SPHERE_RULES:
        raise GridError(
            f"unsupported sphere rule {order}; available: {sorted(_SPHERE_RULES)}")
    dirs = []
    wts = []
    for group, w in _SPHERE_RULES[order]:
        pts = _octahedral_points(group)
        dirs.append(pts)
        wts.append(np.full(len(pts), 4.0 * np.pi * w))
    return SphereQuadrature(order=order,
                            directions=np.concatenate(dirs),
                            weights=np.concatenate(wts))


@dataclass(frozen=True)
class SpatialGrid:
    """Position-space grid: a single point or a uniform periodic interval."""

    mode: str          # "homogeneous-0d" or "periodic-1d"
    length: float
    nx: int
    x: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    def derivative(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Spectral d/dx along ``axis`` (zero for the homogeneous mode)."""
        if self.mode == "homogeneous-0d":
            return np.zeros_like(values)
        k = self.wavenumbers
        shape = [1] * np.ndim(values)
        shape[axis] = self.nx
        vhat = np.fft.fft(values, axis=axis)
        vhat *= (1j * k).reshape(shape)
        return np.real(np.fft.ifft(vhat, axis=axis))

    def integrate(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Integral over the periodic interval (uniform weights)."""
        return np.sum(values, axis=axis) * self.dx


def build_spatial_grid(mode: str, length: float = 2.0 * np.pi,
                       nx: int = 1) -> SpatialGrid:
    if mode not in ("homogeneous-0d", "periodic-1d"):
        raise GridError(f"unknown spatial mode {mode!r}")
    if mode == "homogeneous-0d":
        return SpatialGrid(mode=mode, length=1.0, nx=1, x=np.zeros(1))
    if nx < 4:
        raise GridError(f"periodic grid needs nx >= 4, got {nx}")
    if length <= 0:
        raise GridError(f"domain length must be positive, got {length}")
    x = np.arange(nx) * (length / nx)
    return SpatialGrid(mode=mode, length=float(length), nx=int(nx), x=x)
