"""Numba kernels for the hard-sphere collision integrals.

All kernels share the same geometry: a double sum over velocity-lattice
pairs (v_i, u_j) and sphere directions omega, with post-collisional values
obtained by interpolating an envelope-normalized ratio (zero outside the
truncated cube).  Normalizing first matters: the Maxwellian varies by a
factor ~e^{|v| dv} per cell, so interpolating raw mu-enveloped data has
O(1) relative error.  The bilinear operator kernel interpolates r = g/mu
and restores the envelope mu(v')mu(u') analytically via the collision
energy identity |v'|^2 + |u'|^2 = |v|^2 + |u|^2, which makes the
equilibrium cancellation Q(mu, mu) = 0 hold pointwise to round-off; the
Dirichlet-form kernel works with g / sqrt(mu), the natural variable of
the symmetrized linearized operator.

``iorder`` selects tensor-product Lagrange interpolation: 1 (trilinear,
8-point) or 2 (triquadratic, 27-point).  Order 2 is exact on quadratics,
which makes the discrete operator annihilate all six collision
invariants up to pruning tails.

Pair pruning: pairs with |v|^2 + |u|^2 > s_max are skipped.  Every
integrand handled here carries at least a sqrt(mu(v) mu(u)) envelope, so
the dropped tail is below exp(-s_max / 4).  Pass s_max = inf to disable.
As long as s_max < Vmax^2 the kernels never touch a node where the
sqrt(mu) floor is active, so the floored tables act as exact sqrt(mu).

The u-node loop iterates in order of increasing speed so the pruned set
per output node is a prefix of a precomputed permutation.  Scatter loops
run serially in a fixed order; results are bit-deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, fastmath=True)
def _nu_table(nodes, weights, mu, out):
    n = nodes.shape[0]
    four_pi = 4.0 * np.pi
    for i in range(n):
        vx, vy, vz = nodes[i, 0], nodes[i, 1], nodes[i, 2]
        acc = 0.0
        for j in range(n):
            dx = vx - nodes[j, 0]
            dy = vy - nodes[j, 1]
            dz = vz - nodes[j, 2]
            acc += weights[j] * mu[j] * np.sqrt(dx * dx + dy * dy + dz * dz)
        out[i] = four_pi * acc


@njit(cache=True, fastmath=True, inline="always")
def _axis_stencil(p, vmax, inv_dv, nv, iorder, idx, wt):
    """1-D Lagrange stencil (indices + weights) for one coordinate.

    Returns the entry count; entries outside [0, nv) are dropped (zero
    extension) and near-zero weights are skipped.
    """
    s = (p + vmax) * inv_dv - 0.5
    cnt = 0
    if iorder == 1:
        i0 = int(np.floor(s))
        f = s - i0
        if 0 <= i0 < nv and abs(1.0 - f) > 1e-14:
            idx[cnt] = i0
            wt[cnt] = 1.0 - f
            cnt += 1
        if 0 <= i0 + 1 < nv and abs(f) > 1e-14:
            idx[cnt] = i0 + 1
            wt[cnt] = f
            cnt += 1
    else:
        m = int(np.floor(s + 0.5))
        t = s - m
        w0 = 0.5 * t * (t - 1.0)
        w1 = (1.0 - t) * (1.0 + t)
        w2 = 0.5 * t * (t + 1.0)
        if 0 <= m - 1 < nv and abs(w0) > 1e-14:
            idx[cnt] = m - 1
            wt[cnt] = w0
            cnt += 1
        if 0 <= m < nv and abs(w1) > 1e-14:
            idx[cnt] = m
            wt[cnt] = w1
            cnt += 1
        if 0 <= m + 1 < nv and abs(w2) > 1e-14:
            idx[cnt] = m + 1
            wt[cnt] = w2
            cnt += 1
    return cnt


@njit(cache=True, fastmath=True, inline="always")
def _stencil(px, py, pz, vmax, inv_dv, nv, iorder, idx, wt):
    """Tensor-product stencil: fills flat node indices / weights.

    idx, wt must hold >= 27 entries; returns the count.
    """
    ix = np.empty(3, dtype=np.int64)
    iy = np.empty(3, dtype=np.int64)
    iz = np.empty(3, dtype=np.int64)
    wx = np.empty(3)
    wy = np.empty(3)
    wz = np.empty(3)
    nx = _axis_stencil(px, vmax, inv_dv, nv, iorder, ix, wx)
    ny = _axis_stencil(py, vmax, inv_dv, nv, iorder, iy, wy)
    nz = _axis_stencil(pz, vmax, inv_dv, nv, iorder, iz, wz)
    cnt = 0
    for a in range(nx):
        base_x = ix[a] * nv
        for b in range(ny):
            base = (base_x + iy[b]) * nv
            wxy = wx[a] * wy[b]
            for c in range(nz):
                idx[cnt] = base + iz[c]
                wt[cnt] = wxy * wz[c]
                cnt += 1
    return cnt


@njit(cache=True, fastmath=True, parallel=True)
def _q_direct(nodes, weights, sq, order, sorted_sq, s_max, vmax, dv, nv,
              iorder, omega, womega, env, ra, rb, out):
    """Direct quadrature of the bilinear operator, batched over columns.

    ra, rb: inputs divided by the envelope ``env`` (= sqrt(mu) table),
    shape (n_nodes, n_cols).  out[i] accumulates
      sum w_j w_om |t| env_i env_j (I[ra](v') I[rb](u') - ra_i rb_j)
    which equals the raw operator with the normalized-ratio gain.
    """
    n = nodes.shape[0]
    ncols = ra.shape[1]
    nom = omega.shape[0]
    inv_dv = 1.0 / dv
    for i in prange(n):
        for c in range(ncols):
            out[i, c] = 0.0
        si = sq[i]
        if si > s_max:
            continue
        kmax = np.searchsorted(sorted_sq, s_max - si, side="right")
        vx, vy, vz = nodes[i, 0], nodes[i, 1], nodes[i, 2]
        acc_a = np.empty(ncols)
        acc_b = np.empty(ncols)
        idx_a = np.empty(27, dtype=np.int64)
        wt_a = np.empty(27)
        idx_b = np.empty(27, dtype=np.int64)
        wt_b = np.empty(27)
        for jj in range(kmax):
            j = order[jj]
            dx = vx - nodes[j, 0]
            dy = vy - nodes[j, 1]
            dz = vz - nodes[j, 2]
            envij = env[i] * env[j] * weights[j]
            for m in range(nom):
                t = dx * omega[m, 0] + dy * omega[m, 1] + dz * omega[m, 2]
                kern = envij * womega[m] * abs(t)
                if kern == 0.0:
                    continue
                vpx = vx - t * omega[m, 0]
                vpy = vy - t * omega[m, 1]
                vpz = vz - t * omega[m, 2]
                upx = nodes[j, 0] + t * omega[m, 0]
                upy = nodes[j, 1] + t * omega[m, 1]
                upz = nodes[j, 2] + t * omega[m, 2]
                na = _stencil(vpx, vpy, vpz, vmax, inv_dv, nv, iorder,
                              idx_a, wt_a)
                nb = _stencil(upx, upy, upz, vmax, inv_dv, nv, iorder,
                              idx_b, wt_b)
                for c in range(ncols):
                    acc_a[c] = 0.0
                    acc_b[c] = 0.0
                for a in range(na):
                    w = wt_a[a]
                    node = idx_a[a]
                    for c in range(ncols):
                        acc_a[c] += w * ra[node, c]
                for a in range(nb):
                    w = wt_b[a]
                    node = idx_b[a]
                    for c in range(ncols):
                        acc_b[c] += w * rb[node, c]
                for c in range(ncols):
                    out[i, c] += kern * (acc_a[c] * acc_b[c]
                                         - ra[i, c] * rb[j, c])


@njit(cache=True, fastmath=True)
def _dirichlet_pass(nodes, weights, sq, order, sorted_sq, s_max, vmax, dv,
                    nv, iorder, omega, womega, mu, gp, gm, mode,
                    out_p, out_m, form_out, d1, d2):
    """One pass over all (pair, direction) tuples of the symmetric form.

    The form is the quadrature of the Dirichlet integral of L:
      1/4 sum W [P_g P_h + R_g R_h + T_g T_h],
      W = w_i w_j w_om |t| mu_i mu_j,
    with per-species jumps D_s = G_s(v) - I[G_s](v'), D*_s at u, and
    P = D+ - D-, R = D*+ - D*-, T = D+ + D- + D*+ + D*-; each tuple term
    is PSD, so symmetry and nonnegativity of L are structural.

    mode 0: operator application (fills out_p / out_m with the weak-form
            gradient; caller divides by node weight and sqrt(mu)).
    mode 1: quadratic form values per column (fills form_out).
    mode 2: dense assembly of the species blocks d1 / d2 acting on
            G = g / sqrt(mu).

    gp, gm: per-species G = g_s / sqrt(mu), shape (n_nodes, n_cols).
    """
    n = nodes.shape[0]
    ncols = gp.shape[1]
    nom = omega.shape[0]
    inv_dv = 1.0 / dv
    cidx = np.empty(28, dtype=np.int64)
    cco = np.empty(28)
    didx = np.empty(28, dtype=np.int64)
    dco = np.empty(28)
    iva = np.empty(27, dtype=np.int64)
    wva = np.empty(27)
    iub = np.empty(27, dtype=np.int64)
    wub = np.empty(27)
    for i in range(n):
        si = sq[i]
        if si > s_max:
            continue
        kmax = np.searchsorted(sorted_sq, s_max - si, side="right")
        vx, vy, vz = nodes[i, 0], nodes[i, 1], nodes[i, 2]
        wi_mu = weights[i] * mu[i]
        for jj in range(kmax):
            j = order[jj]
            dx = vx - nodes[j, 0]
            dy = vy - nodes[j, 1]
            dz = vz - nodes[j, 2]
            wfac = 0.25 * wi_mu * weights[j] * mu[j]
            for m in range(nom):
                t = dx * omega[m, 0] + dy * omega[m, 1] + dz * omega[m, 2]
                if t == 0.0:
                    continue
                w = wfac * womega[m] * abs(t)
                vpx = vx - t * omega[m, 0]
                vpy = vy - t * omega[m, 1]
                vpz = vz - t * omega[m, 2]
                upx = nodes[j, 0] + t * omega[m, 0]
                upy = nodes[j, 1] + t * omega[m, 1]
                upz = nodes[j, 2] + t * omega[m, 2]
                ncv = _stencil(vpx, vpy, vpz, vmax, inv_dv, nv, iorder,
                               iva, wva)
                ncu = _stencil(upx, upy, upz, vmax, inv_dv, nv, iorder,
                               iub, wub)
                if mode == 2:
                    # coefficient vectors of the two jump functionals
                    cidx[0] = i
                    cco[0] = 1.0
                    for a in range(ncv):
                        cidx[1 + a] = iva[a]
                        cco[1 + a] = -wva[a]
                    didx[0] = j
                    dco[0] = 1.0
                    for a in range(ncu):
                        didx[1 + a] = iub[a]
                        dco[1 + a] = -wub[a]
                    nc = 1 + ncv
                    nd = 1 + ncu
                    for a in range(nc):
                        ia = cidx[a]
                        va = cco[a] * w
                        for b in range(nc):
                            d1[ia, cidx[b]] += 2.0 * va * cco[b]
                        for b in range(nd):
                            val = va * dco[b]
                            d1[ia, didx[b]] += val
                            d2[ia, didx[b]] += val
                    for a in range(nd):
                        ia = didx[a]
                        va = dco[a] * w
                        for b in range(nd):
                            d1[ia, didx[b]] += 2.0 * va * dco[b]
                        for b in range(nc):
                            val = va * cco[b]
                            d1[ia, cidx[b]] += val
                            d2[ia, cidx[b]] += val
                    continue
                for c in range(ncols):
                    # jumps D = G(v) - I[G](v'), at v for each species ...
                    ipa = gp[i, c]
                    ima = gm[i, c]
                    for a in range(ncv):
                        ipa -= wva[a] * gp[iva[a], c]
                        ima -= wva[a] * gm[iva[a], c]
                    # ... and at u
                    ipb = gp[j, c]
                    imb = gm[j, c]
                    for a in range(ncu):
                        ipb -= wub[a] * gp[iub[a], c]
                        imb -= wub[a] * gm[iub[a], c]
                    pv = ipa - ima
                    ru = ipb - imb
                    tt = ipa + ima + ipb + imb
                    if mode == 1:
                        form_out[c] += w * (pv * pv + ru * ru + tt * tt)
                        continue
                    cvp = w * (pv + tt)
                    cvm = w * (tt - pv)
                    cup = w * (ru + tt)
                    cum = w * (tt - ru)
                    out_p[i, c] += cvp
                    out_m[i, c] += cvm
                    out_p[j, c] += cup
                    out_m[j, c] += cum
                    for a in range(ncv):
                        out_p[iva[a], c] -= wva[a] * cvp
                        out_m[iva[a], c] -= wva[a] * cvm
                    for a in range(ncu):
                        out_p[iub[a], c] -= wub[a] * cup
                        out_m[iub[a], c] -= wub[a] * cum
