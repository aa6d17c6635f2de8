"""Global Maxwellian, collision-invariant basis and hydrodynamic projection.

Two-species velocity functions g = [g_plus, g_minus] are plain arrays with
the species axis first: shape (2, n_nodes) at a single spatial point, or
(2, n_nodes, nx) for a batch of spatial points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VelocityGrid, integrate_v

_MU_NORM = (2.0 * np.pi) ** -1.5


class ProjectionError(ValueError):
    """Degenerate collision-invariant basis (grid too coarse)."""


def maxwellian(v: np.ndarray) -> np.ndarray:
    """Normalized global equilibrium (2*pi)^(-3/2) exp(-|v|^2 / 2)."""
    v = np.asarray(v, dtype=float)
    return _MU_NORM * np.exp(-0.5 * np.sum(v * v, axis=-1))


def mu_table(grid: VelocityGrid) -> np.ndarray:
    """Maxwellian sampled at every grid node."""
    return maxwellian(grid.nodes)


def sqrt_mu_table(grid: VelocityGrid) -> np.ndarray:
    return np.sqrt(mu_table(grid))


@dataclass(frozen=True)
class NullBasis:
    """Discretized spanning set of the collision-invariant subspace.

    Vectors, in coefficient order:
      e1 = [sqrt(mu), 0]          e2 = [0, sqrt(mu)]
      e3..e5 = [v_i sqrt(mu), v_i sqrt(mu)]
      e6 = [|v|^2 sqrt(mu), |v|^2 sqrt(mu)]
    """

    grid: VelocityGrid
    vectors: np.ndarray = field(repr=False)     # (6, 2, n_nodes)
    gram: np.ndarray = field(repr=False)        # (6, 6)
    gram_inv: np.ndarray = field(repr=False)


def inner_v(g: np.ndarray, h: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Two-species L^2(v) inner product; broadcasts over trailing axes."""
    prod = np.sum(g * h, axis=0)
    return integrate_v(prod, grid)


def build_null_basis(grid: VelocityGrid) -> NullBasis:
    root_mu = sqrt_mu_table(grid)
    n = grid.n_nodes
    vecs = np.zeros((6, 2, n))
    vecs[0, 0] = root_mu
    vecs[1, 1] = root_mu
    for i in range(3):
        vecs[2 + i, 0] = grid.nodes[:, i] * root_mu
        vecs[2 + i, 1] = vecs[2 + i, 0]
    vecs[5, 0] = grid.speed_sq * root_mu
    vecs[5, 1] = vecs[5, 0]

    gram = np.empty((6, 6))
    for a in range(6):
        for b in range(a, 6):
            gram[a, b] = gram[b, a] = inner_v(vecs[a], vecs[b], grid)
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[0] <= 1e-12 * eigvals[-1]:
        raise ProjectionError(
            f"collision-invariant Gram matrix nearly singular "
            f"(eigenvalues {eigvals}); refine the velocity grid")
    return NullBasis(grid=grid, vectors=vecs, gram=gram,
                     gram_inv=np.linalg.inv(gram))


def projection_coefficients(g: np.ndarray, basis: NullBasis) -> np.ndarray:
    """Coefficients (a+, a-, b1, b2, b3, c) of the hydrodynamic part.

    Solves the 6x6 Gram system so the residual g - sum c_n e_n is
    orthogonal to every basis vector in the discrete inner product.
    """
    rhs = np.stack([inner_v(g, e[..., None] if np.ndim(g) == 3 else e,
                            basis.grid) for e in basis.vectors])
    return basis.gram_inv @ rhs


def from_coefficients(coeffs: np.ndarray, basis: NullBasis) -> np.ndarray:
    """Assemble sum c_n e_n; coeffs shaped (6,) or (6, nx)."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 1:
        return np.tensordot(c, basis.vectors, axes=(0, 0))        # (2, n)
    return np.tensordot(basis.vectors, c, axes=(0, 0))            # (2, n, nx)


def project_P(g: np.ndarray, basis: NullBasis):
    """Orthogonal projection onto the collision invariants.

    Returns (Pg, coeffs) with coeffs ordered (a+, a-, b1, b2, b3, c).
    """
    coeffs = projection_coefficients(g, basis)
    return from_coefficients(coeffs, basis), coeffs


def micro_part(g: np.ndarray, basis: NullBasis) -> np.ndarray:
    """Microscopic complement g - Pg."""
    pg, _ = project_P(g, basis)
    return g - pg


@dataclass
class MacroFields:
    """Hydrodynamic coefficient fields over the spatial grid."""

    a_plus: np.ndarray
    a_minus: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    c: np.ndarray

    @classmethod
    def from_coefficients(cls, coeffs: np.ndarray) -> "MacroFields":
        """coeffs shaped (6,) or (6, nx), ordered (a+, a-, b1, b2, b3, c)."""
        c = np.atleast_2d(np.asarray(coeffs, dtype=float).T).T
        return cls(a_plus=c[0], a_minus=c[1], b1=c[2], b2=c[3], b3=c[4],
                   c=c[5])

    def as_array(self) -> np.ndarray:
        return np.stack([self.a_plus, self.a_minus,
                         self.b1, self.b2, self.b3, self.c])
