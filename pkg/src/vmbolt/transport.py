"""Right-hand side of the perturbation equation.

df/dt = -v1 dx f - q(E + v x B).grad_v f + {E.v} sqrt(mu) q1
        + (q/2){E.v} f - L f + Gamma(f, f)

with q = diag(1, -1) acting on the species pair and q1 = [1, -1].  The
pieces are exposed separately (transport, linear field source, bilinear
force, collision) because the diagnostics differentiate the RHS term by
term when building temporal derivatives.

Distribution arrays are (2, n_nodes, nx); velocity derivatives use
4th-order central differences with one-sided closures at the cube faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionWorkspace, apply_Gamma, apply_L
from .fields import EMField, compute_charge_current
from .grid import SpatialGrid, VelocityGrid
from .maxwellian import NullBasis, sqrt_mu_table

_Q_SIGN = np.array([1.0, -1.0])          # species charges q = diag(1, -1)


def fd4_matrix(n: int, h: float) -> np.ndarray:
    """Dense 1-D 4th-order first-derivative matrix, one-sided at the ends."""
    d = np.zeros((n, n))
    c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    for i in range(2, n - 2):
        d[i, i - 2:i + 3] = c
    fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    skew = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    d[0, :5] = fwd
    d[1, :5] = skew
    d[n - 1, n - 5:] = -fwd[::-1]
    d[n - 2, n - 5:] = -skew[::-1]
    return d


@dataclass
class Model:
    """Bundles the discretization objects and physics toggles for a run."""

    vgrid: VelocityGrid
    sgrid: SpatialGrid
    ws: CollisionWorkspace
    basis: NullBasis
    enable_gamma: bool = True
    enable_force_nl: bool = True
    enable_fields: bool = True
    damping_strength: float = 1.0           # velocity-boundary damping rate
    gamma_ws: CollisionWorkspace = None     # reduced quadrature for Gamma
    _dv_matrix: np.ndarray = field(default=None, repr=False)
    _ev_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dv_matrix(self) -> np.ndarray:
        if self._dv_matrix is None:
            self._dv_matrix = fd4_matrix(self.vgrid.nv, self.vgrid.dv)
        return self._dv_matrix

    @property
    def ws_gamma(self) -> CollisionWorkspace:
        """Workspace used for the bilinear Gamma (defaults to ``ws``)."""
        return self.gamma_ws if self.gamma_ws is not None else self.ws


@dataclass
class KineticState:
    """Evolved object: perturbation f (2, n_nodes, nx), fields, time."""

    f: np.ndarray
    em: EMField
    t: float = 0.0


def grad_v(f: np.ndarray, model: Model) -> np.ndarray:
    """Velocity gradient (3, 2, n_nodes, nx) by 4th-order differences."""
    nv = model.vgrid.nv
    d = model.dv_matrix
    cube = f.reshape(f.shape[0], nv, nv, nv, -1)
    out = np.empty((3,) + f.shape)
    for ax in range(3):
        g = np.moveaxis(np.tensordot(d, cube, axes=(1, 1 + ax)), 0, 1 + ax)
        out[ax] = g.reshape(f.shape)
    return out


def transport_term(f: np.ndarray, model: Model) -> np.ndarray:
    """-v1 dx f (zero in the homogeneous mode)."""
    if model.sgrid.mode == "homogeneous-0d":
        return np.zeros_like(f)
    dxf = model.sgrid.derivative(f, axis=2)
    return -model.vgrid.nodes[None, :, 0, None] * dxf


def _e_dot_v(e: np.ndarray, model: Model) -> np.ndarray:
    """{E.v} as an (n_nodes, nx) table."""
    return model.vgrid.nodes @ e                      # (n, 3) @ (3, nx)


def force_source(e: np.ndarray, model: Model) -> np.ndarray:
    """Linear field source {E.v} sqrt(mu) q1."""
    ev = _e_dot_v(e, model)
    smu = sqrt_mu_table(model.vgrid)
    return _Q_SIGN[:, None, None] * (smu[:, None] * ev)[None]


def force_bilinear(e: np.ndarray, b: np.ndarray, f: np.ndarray,
                   model: Model) -> np.ndarray:
    """-q(E + v x B).grad_v f + (q/2){E.v} f  (quadratic in perturbations)."""
    v = model.vgrid.nodes
    # field vector E + v x B per (component, n, nx)
    fv = np.empty((3, model.vgrid.n_nodes, e.shape[1]))
    fv[0] = e[0] + v[:, 1, None] * b[2] - v[:, 2, None] * b[1]
    fv[1] = e[1] + v[:, 2, None] * b[0] - v[:, 0, None] * b[2]
    fv[2] = e[2] + v[:, 0, None] * b[1] - v[:, 1, None] * b[0]
    gv = grad_v(f, model)
    adv = np.einsum("knx,ksnx->snx", fv, gv)
    ev = _e_dot_v(e, model)
    q = _Q_SIGN[:, None, None]
    return q * (-adv + 0.5 * ev[None] * f)


def force_term(f: np.ndarray, em: EMField, model: Model) -> np.ndarray:
    """Full force contribution of the perturbation equation."""
    return force_source(em.e, model) + force_bilinear(em.e, em.b, f, model)


def vlasov_rhs(state: KineticState, model: Model) -> np.ndarray:
    """Complete df/dt; exactly zero at the equilibrium (f=0, E=B=0)."""
    f = state.f
    out = transport_term(f, model)
    if model.enable_fields:
        out += force_source(state.em.e, model)
    if model.enable_force_nl and model.enable_fields:
        out += force_bilinear(state.em.e, state.em.b, f, model)
    out -= apply_L(f, model.ws)
    if model.enable_gamma:
        out += apply_Gamma(f, f, model.ws_gamma)
    return out


def maxwell_rhs(em: EMField, f: np.ndarray, model: Model):
    """Continuous-time field equations (dE/dt, dB/dt), for the derivative
    stack; the driver uses the leapfrog map instead."""
    dx = model.sgrid.derivative
    j = compute_charge_current(f, model.vgrid, model.basis).j
    de = np.empty_like(em.e)
    db = np.empty_like(em.b)
    de[0] = -j[0]
    de[1] = -dx(em.b[2]) - j[1]
    de[2] = dx(em.b[1]) - j[2]
    db[0] = 0.0
    db[1] = dx(em.e[2])
    db[2] = -dx(em.e[1])
    return de, db


def boundary_damping(vgrid: VelocityGrid, shells: int = 2,
                     strength: float = 1.0) -> np.ndarray:
    """Damping rate per node, positive on the outermost velocity shells.

    Applied by the integrator as a continuous rate exp(-sigma dt), the
    surrogate for decay at the truncated cube boundary.
    """
    nv = vgrid.nv
    idx = np.arange(nv)
    depth = np.minimum(idx, nv - 1 - idx)           # cells from the face
    ramp = np.where(depth < shells, (shells - depth) / shells, 0.0)
    r1, r2, r3 = np.meshgrid(ramp, ramp, ramp, indexing="ij")
    sigma = strength * np.maximum(np.maximum(r1, r2), r3) ** 2
    return sigma.ravel()
