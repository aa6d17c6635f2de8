"""Hard-sphere collision operators: Q, nu, L, K and Gamma.

Two discretizations of the linearized operator live here:

* ``apply_L`` / ``l_form`` / ``assemble_L`` — a symmetric quadratic-form
  discretization.  The Dirichlet form of L (the pair-sum of squared jumps
  weighted by mu(v) mu(u) |(v-u).omega|) is discretized directly, and the
  operator is its weak-form gradient.  Symmetry and nonnegativity then
  hold to round-off, and the six collision invariants are annihilated up
  to the trilinear interpolation error on |v|^2 alone.
* ``apply_L_definitional`` — the literal composition of Q evaluations.
  It is a consistent but non-symmetric discretization, kept as an
  independent cross-check route.

Both routes converge to the same operator under grid refinement; tests
compare them at discretization tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._collision_kernels import _dirichlet_pass, _nu_table, _q_direct
from .grid import (SphereQuadrature, VelocityGrid, build_sphere_quadrature,
                   integrate_v)
from .maxwellian import mu_table, sqrt_mu_table


class CollisionError(ValueError):
    """Workspace / operand mismatch or unsafe configuration."""


def post_collision(v, u, omega):
    """Hard-sphere post-collisional velocities.

    v' = v - [(v-u).omega] omega, u' = u + [(v-u).omega] omega; exchanges
    the velocity component along omega, conserving momentum and energy.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    omega = np.asarray(omega, dtype=float)
    norm = np.sum(omega * omega, axis=-1)
    if not np.allclose(norm, 1.0, rtol=0.0, atol=1e-12):
        raise CollisionError("omega must be a unit vector")
    t = np.sum((v - u) * omega, axis=-1, keepdims=True)
    return v - t * omega, u + t * omega


@dataclass
class CollisionWorkspace:
    """Immutable tables shared by all collision evaluations on one grid.

    ``s_max`` prunes velocity pairs with |v|^2 + |u|^2 > s_max.  All
    integrands here carry at least a sqrt(mu(v)mu(u)) envelope, so the
    dropped tail is below exp(-s_max/4); np.inf disables pruning.
    """

    grid: VelocityGrid
    sphere: SphereQuadrature
    s_max: float
    interp_order: int
    mu: np.ndarray = field(repr=False)
    mu_floored: np.ndarray = field(repr=False)    # floored, see build_workspace
    sqrt_mu: np.ndarray = field(repr=False)       # floored, see build_workspace
    order: np.ndarray = field(repr=False)         # nodes by increasing |v|^2
    sorted_sq: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)           # (5, n) invariants 1, v, |v|^2
    psi_gram_inv: np.ndarray = field(repr=False)  # inverse of <psi_k, psi_m mu>
    _nu: np.ndarray | None = field(default=None, repr=False)
    _blocks: tuple | None = field(default=None, repr=False)

    @property
    def nu(self) -> np.ndarray:
        """Collision frequency table nu(v_i), computed once on demand."""
        if self._nu is None:
            out = np.empty(self.grid.n_nodes)
            _nu_table(self.grid.nodes, self.grid.weights, self.mu, out)
            self._nu = out
        return self._nu


def build_workspace(grid: VelocityGrid, sphere: SphereQuadrature | None = None,
                    s_max: float = 60.0, floor: bool = True,
                    interp_order: int = 2) -> CollisionWorkspace:
    """Precompute the shared tables for collision evaluation.

    interp_order 2 (default) uses triquadratic Lagrange interpolation for
    post-collisional values, which is exact on quadratics — the linearized
    operator then annihilates all six collision invariants up to pruning
    tails.  Order 1 (trilinear) is cheaper and kept for refinement and
    cross-route studies.

    The 1/sqrt(mu) prefactors of L and Gamma use a floored table
    max(sqrt(mu), exp(-Vmax^2/4)) so no amplification beyond exp(Vmax^2/4)
    can occur; with pruning at s_max < Vmax^2 the floor is never active on
    a node the kernels touch, so it does not perturb the operators.
    """
    if sphere is None:
        sphere = build_sphere_quadrature(14)
    if interp_order not in (1, 2):
        raise CollisionError(f"interp_order must be 1 or 2, got {interp_order}")
    if not floor and grid.vmax > 12.0:
        raise CollisionError(
            "disabling the sqrt(mu) floor would amplify round-off by "
            f"exp({grid.vmax ** 2 / 4:.0f}); not allowed for vmax > 12")
    mu = mu_table(grid)
    smu = sqrt_mu_table(grid)
    mu_f = mu
    if floor:
        smu = np.maximum(smu, np.exp(-grid.vmax ** 2 / 4.0))
        mu_f = np.maximum(mu, np.exp(-grid.vmax ** 2 / 2.0))
    sq = grid.speed_sq
    order = np.argsort(sq, kind="stable")
    psi = np.empty((5, grid.n_nodes))
    psi[0] = 1.0
    psi[1:4] = grid.nodes.T
    psi[4] = sq
    gram = np.einsum("kn,mn,n,n->km", psi, psi, mu, grid.weights)
    return CollisionWorkspace(
        grid=grid, sphere=sphere, s_max=float(s_max),
        interp_order=int(interp_order), mu=mu, mu_floored=mu_f, sqrt_mu=smu,
        order=order, sorted_sq=sq[order], psi=psi,
        psi_gram_inv=np.linalg.inv(gram))


def _as_cols(values, n):
    """(n,) or (n, C) -> (n, C) contiguous, plus a squeeze flag."""
    a = np.ascontiguousarray(values, dtype=float)
    if a.shape[0] != n:
        raise CollisionError(f"operand has {a.shape[0]} nodes, grid has {n}")
    if a.ndim == 1:
        return a[:, None], True
    if a.ndim != 2:
        raise CollisionError(f"operand must be (n,) or (n, cols), got {a.shape}")
    return a, False


def conservation_correction(q_raw: np.ndarray, ws: CollisionWorkspace,
                            return_magnitude: bool = False):
    """Remove the discrete violation of the collision invariants.

    Subtracts the mu-weighted combination of {1, v, |v|^2} that zeroes all
    five moments of the input; the subtracted part is the quadrature /
    interpolation error and must shrink under refinement.
    """
    cols, squeeze = _as_cols(q_raw, ws.grid.n_nodes)
    moments = ws.psi @ (ws.grid.weights[:, None] * cols)           # (5, C)
    coeff = ws.psi_gram_inv @ moments
    correction = (ws.psi.T * ws.mu[:, None]) @ coeff               # (n, C)
    out = cols - correction
    if squeeze:
        out = out[:, 0]
        correction = correction[:, 0]
    if return_magnitude:
        mag = np.sqrt(np.sum(ws.grid.weights[:, None] * correction ** 2
                             if not squeeze else
                             ws.grid.weights * correction ** 2, axis=0))
        return out, mag
    return out


def eval_Q(ga: np.ndarray, gb: np.ndarray, ws: CollisionWorkspace,
           correct: bool = True) -> np.ndarray:
    """Bilinear hard-sphere operator on per-node samples (batched in cols).

    Post-collisional gain values are obtained by interpolating the
    mu-normalized ratios and restoring the Maxwellian envelope through
    the collision energy identity mu(v')mu(u') = mu(v)mu(u), so the
    equilibrium Q(mu, mu) cancels pointwise to round-off rather than to
    interpolation accuracy.  Zero extension outside the cube;
    conservation-corrected unless ``correct=False``.
    """
    g = ws.grid
    a, squeeze_a = _as_cols(ga, g.n_nodes)
    b, squeeze_b = _as_cols(gb, g.n_nodes)
    if a.shape != b.shape:
        raise CollisionError(f"operand shapes differ: {a.shape} vs {b.shape}")
    ra = a / ws.mu_floored[:, None]
    rb = b / ws.mu_floored[:, None]
    out = np.empty_like(a)
    _q_direct(g.nodes, g.weights, g.speed_sq, ws.order, ws.sorted_sq,
              ws.s_max, g.vmax, g.dv, g.nv, ws.interp_order,
              ws.sphere.directions, ws.sphere.weights, ws.mu,
              ra, rb, out)
    if correct:
        out = conservation_correction(out, ws)
    return out[:, 0] if (squeeze_a and squeeze_b) else out


def collision_frequency(v, ws: CollisionWorkspace):
    """nu(v) = 4 pi * integral |v - u| mu(u) du by the lattice quadrature."""
    v = np.asarray(v, dtype=float)
    diff = v[..., None, :] - ws.grid.nodes          # (..., n, 3)
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return 4.0 * np.pi * (dist @ (ws.grid.weights * ws.mu))


def _two_species_cols(g, n):
    """(2, n[, ...]) -> per-species (n, C) views plus original shape."""
    arr = np.asarray(g, dtype=float)
    if arr.shape[0] != 2 or arr.shape[1] != n:
        raise CollisionError(f"expected shape (2, {n}, ...), got {arr.shape}")
    shape = arr.shape
    return arr.reshape(2, n, -1), shape


def _dirichlet(gp, gm, ws, mode, out_p=None, out_m=None, form=None,
               d1=None, d2=None):
    g = ws.grid
    zero2 = np.zeros((1, 1))
    _dirichlet_pass(g.nodes, g.weights, g.speed_sq, ws.order, ws.sorted_sq,
                    ws.s_max, g.vmax, g.dv, g.nv, ws.interp_order,
                    ws.sphere.directions, ws.sphere.weights, ws.mu,
                    np.ascontiguousarray(gp), np.ascontiguousarray(gm), mode,
                    zero2 if out_p is None else out_p,
                    zero2 if out_m is None else out_m,
                    np.zeros(1) if form is None else form,
                    zero2 if d1 is None else d1,
                    zero2 if d2 is None else d2)


def apply_L(g, ws: CollisionWorkspace) -> np.ndarray:
    """Linearized collision operator via the symmetric quadratic form.

    Accepts (2, n) or (2, n, cols); uses the assembled dense blocks when
    ``assemble_L`` has been called on this workspace, else the matrix-free
    kernel.
    """
    cols, shape = _two_species_cols(g, ws.grid.n_nodes)
    gp = cols[0] / ws.sqrt_mu[:, None]
    gm = cols[1] / ws.sqrt_mu[:, None]
    if ws._blocks is not None:
        d1, d2 = ws._blocks
        yp = d1 @ gp + d2 @ gm
        ym = d2 @ gp + d1 @ gm
    else:
        yp = np.zeros_like(gp)
        ym = np.zeros_like(gm)
        _dirichlet(gp, gm, ws, 0, out_p=yp, out_m=ym)
    scale = 1.0 / (ws.grid.weights * ws.sqrt_mu)
    out = np.stack([yp, ym]) * scale[:, None]
    return out.reshape(shape)


def l_form(g, ws: CollisionWorkspace):
    """Quadratic form values <Lg, g> per column, without forming Lg.

    g: (2, n) -> float, or (2, n, cols) -> (cols,).
    """
    cols, shape = _two_species_cols(g, ws.grid.n_nodes)
    gp = cols[0] / ws.sqrt_mu[:, None]
    gm = cols[1] / ws.sqrt_mu[:, None]
    out = np.zeros(gp.shape[1])
    _dirichlet(gp, gm, ws, 1, form=out)
    return float(out[0]) if len(shape) == 2 else out


def assemble_L(ws: CollisionWorkspace) -> None:
    """Assemble and cache the dense species blocks of the quadratic form.

    Memory is 2 * n^2 doubles (about 0.4 GB at Nv = 17); subsequent
    apply_L calls become two pairs of dense matmuls.
    """
    if ws._blocks is not None:
        return
    n = ws.grid.n_nodes
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    empty = np.zeros((n, 1))
    _dirichlet(empty, empty, ws, 2, d1=d1, d2=d2)
    # the accumulated blocks are symmetric up to round-off; symmetrize so
    # downstream linear algebra sees it exactly
    d1 = 0.5 * (d1 + d1.T)
    d2 = 0.5 * (d2 + d2.T)
    ws._blocks = (d1, d2)


def apply_L_definitional(g, ws: CollisionWorkspace) -> np.ndarray:
    """Literal composition route for L, kept as an independent check.

    L(g)_s = -2 Q(sqrt(mu) g_s, mu)/sqrt(mu) - Q(mu, sqrt(mu)(g_s + g_-s))
    / sqrt(mu), each Q by direct (uncorrected) quadrature.
    """
    cols, shape = _two_species_cols(g, ws.grid.n_nodes)
    smu = ws.sqrt_mu[:, None]
    mu_cols = np.broadcast_to(ws.mu[:, None], cols[0].shape)
    total = smu * (cols[0] + cols[1])
    out = np.empty_like(cols)
    for s in range(2):
        q1 = eval_Q(smu * cols[s], mu_cols, ws, correct=False)
        q2 = eval_Q(mu_cols, total, ws, correct=False)
        out[s] = -(2.0 * q1 + q2) / smu
    return out.reshape(shape)


def apply_K(g, ws: CollisionWorkspace) -> np.ndarray:
    """Compact part K g = nu * g - L g."""
    arr = np.asarray(g, dtype=float)
    nu = ws.nu.reshape((1, -1) + (1,) * (arr.ndim - 2))
    return nu * arr - apply_L(arr, ws)


def apply_Gamma(g, h, ws: CollisionWorkspace) -> np.ndarray:
    """Nonlinear collision operator.

    Gamma_s(g, h) = [Q(sqrt(mu) g_s, sqrt(mu) h_s) + Q(sqrt(mu) g_s,
    sqrt(mu) h_-s)] / sqrt(mu); by bilinearity the second operand collapses
    to sqrt(mu)(h_+ + h_-).  Each species output is conservation-corrected
    before the prefactor, so its moments against the collision invariants
    vanish to round-off.
    """
    n = ws.grid.n_nodes
    gc, shape = _two_species_cols(g, n)
    hc, hshape = _two_species_cols(h, n)
    if shape != hshape:
        raise CollisionError(f"operand shapes differ: {shape} vs {hshape}")
    ncols = gc.shape[2]
    smu = ws.sqrt_mu[:, None]
    h_tot = smu * (hc[0] + hc[1])
    a = np.concatenate([smu * gc[0], smu * gc[1]], axis=1)   # (n, 2C)
    b = np.concatenate([h_tot, h_tot], axis=1)
    q = eval_Q(a, b, ws, correct=True)
    out = np.stack([q[:, :ncols], q[:, ncols:]]) / smu[None]
    return out.reshape(shape)
