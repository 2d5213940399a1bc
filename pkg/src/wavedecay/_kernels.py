"""Compiled grid kernels.

Arrays are (N, M, M) float64, indexed [component, ix, iy].  Every kernel works
on the square block of nodes ``lo <= ix, iy < hi`` and assumes the ring of
nodes around that block holds valid values (zeros outside the support).

Work is organised row by row: each row of the block is expanded into
per-row buffers of derivatives so that the inner loops run over contiguous
memory and vectorize.

The nonlinearity is passed as sparse rows: ``q_idx[e] = (j, k, l, a, b)`` and
``c_idx[e] = (j, k, l, m, a, b, c)``, all 0-based.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _eval_f_row(P, q_idx, q_val, c_idx, c_val, F, width):
    F[:, :width] = 0.0
    for e in range(q_idx.shape[0]):
        j, k, l, a, b = q_idx[e, 0], q_idx[e, 1], q_idx[e, 2], q_idx[e, 3], q_idx[e, 4]
        v = q_val[e]
        for x in range(width):
            F[j, x] += v * P[a, k, x] * P[b, l, x]
    for e in range(c_idx.shape[0]):
        j, k, l, m = c_idx[e, 0], c_idx[e, 1], c_idx[e, 2], c_idx[e, 3]
        a, b, c = c_idx[e, 4], c_idx[e, 5], c_idx[e, 6]
        v = c_val[e]
        for x in range(width):
            F[j, x] += v * P[a, k, x] * P[b, l, x] * P[c, m, x]


@njit(cache=True)
def step_kernel(u, up, un, lo, hi, h, dt, q_idx, q_val, c_idx, c_val, correct):
    """Leapfrog update u^{n+1} = 2u^n - u^{n-1} + dt^2 (lap u^n + F(du^n)).

    With ``correct`` the time slot of du is re-evaluated once with the centred
    difference (u^{n+1} - u^{n-1})/(2 dt) of the predicted update.
    Returns max |u^{n+1}| over the block (nan propagates).
    """
    n = u.shape[0]
    width = hi - lo
    P = np.empty((3, n, width))
    F = np.zeros((n, width))
    base = np.empty((n, width))
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    dt2 = dt * dt
    inv_dt = 1.0 / dt
    inv_2dt = 0.5 / dt
    has_f = q_idx.shape[0] + c_idx.shape[0] > 0
    amax = 0.0
    for i in range(lo, hi):
        for j in range(n):
            uc = u[j, i]
            ue = u[j, i + 1]
            uw = u[j, i - 1]
            upc = up[j, i]
            for x in range(width):
                k = lo + x
                lap = (ue[k] + uw[k] + uc[k + 1] + uc[k - 1] - 4.0 * uc[k]) * invh2
                base[j, x] = 2.0 * uc[k] - upc[k] + dt2 * lap
                P[0, j, x] = (uc[k] - upc[k]) * inv_dt
                P[1, j, x] = (ue[k] - uw[k]) * inv2h
                P[2, j, x] = (uc[k + 1] - uc[k - 1]) * inv2h
        if has_f:
            _eval_f_row(P, q_idx, q_val, c_idx, c_val, F, width)
            if correct:
                for j in range(n):
                    upc = up[j, i]
                    for x in range(width):
                        pred = base[j, x] + dt2 * F[j, x]
                        P[0, j, x] = (pred - upc[lo + x]) * inv_2dt
                _eval_f_row(P, q_idx, q_val, c_idx, c_val, F, width)
        for j in range(n):
            out = un[j, i]
            for x in range(width):
                v = base[j, x] + dt2 * F[j, x]
                out[lo + x] = v
                av = abs(v)
                if not av <= amax:
                    amax = av
    return amax


@njit(cache=True)
def energy_kernel(u, up, lo, hi, h, dt, t_half, x0, mu, tol):
    """Half-level energy, sup norms and support over the block.

    Returns (energy_sq, max_du, weighted, support) where ``energy_sq`` is the
    leapfrog-conserved energy
    1/2 sum[(D_t u)^2 + D+x u^n D+x u^{n-1} + D+y u^n D+y u^{n-1}] h^2.
    """
    n = u.shape[0]
    h2 = h * h
    inv4h = 0.25 / h
    inv_dt = 1.0 / dt
    width = hi - lo
    du2 = np.empty(width)
    esq = 0.0
    max_du2 = 0.0
    weighted = 0.0
    support = 0.0
    expo = 0.5 * (1.0 - mu)
    for i in range(lo, hi):
        x = x0 + i * h
        du2[:] = 0.0
        for j in range(n):
            uc, ue, uw = u[j, i], u[j, i + 1], u[j, i - 1]
            pc, pe, pw = up[j, i], up[j, i + 1], up[j, i - 1]
            for q in range(width):
                k = lo + q
                a = uc[k]
                b = pc[k]
                ut = (a - b) * inv_dt
                ux = (ue[k] - uw[k] + pe[k] - pw[k]) * inv4h
                uy = (uc[k + 1] - uc[k - 1] + pc[k + 1] - pc[k - 1]) * inv4h
                du2[q] += ut * ut + ux * ux + uy * uy
                if abs(a) > tol or abs(b) > tol:
                    y = x0 + k * h
                    r = math.sqrt(x * x + y * y)
                    if r > support:
                        support = r
        for q in range(width):
            d2 = du2[q]
            if d2 > 0.0:
                if d2 > max_du2:
                    max_du2 = d2
                y = x0 + (lo + q) * h
                r = math.sqrt(x * x + y * y)
                wt2 = math.sqrt(1.0 + (t_half + r) ** 2) * (1.0 + (t_half - r) ** 2) ** (2.0 * expo)
                if wt2 * d2 > weighted:
                    weighted = wt2 * d2
    # forward differences also start from the ring just below the block
    for j in range(n):
        for i in range(lo - 1, hi):
            uc, ue = u[j, i], u[j, i + 1]
            pc, pe = up[j, i], up[j, i + 1]
            for k in range(lo - 1, hi):
                a = uc[k]
                b = pc[k]
                ut = (a - b) * inv_dt
                esq += ut * ut + ((ue[k] - a) * (pe[k] - b) + (uc[k + 1] - a) * (pc[k + 1] - b)) / h2
    return 0.5 * esq * h2, math.sqrt(max_du2), math.sqrt(weighted), support


@njit(cache=True)
def _eta(z, rho_mode, table, z0, dz):
    if rho_mode == 2:
        return 0.5 * math.pi + math.atan(z)
    x = (z - z0) / dz
    if x <= 0.0:
        return table[0]
    last = table.shape[0] - 1
    if x >= last:
        return table[last]
    i = int(x)
    w = x - i
    return (1.0 - w) * table[i] + w * table[i + 1]


@njit(cache=True)
def ghost_kernel(
    u, up, lo, hi, h, dt, t_half, x0, rho, rho_mode, table, z0, dz,
    q_idx, q_val, c_idx, c_val,
):
    """Ghost-weight integrals at the half level.

    Returns (ghost, zflux, source):
      ghost  = int e^eta |du|^2
      zflux  = int e^eta |Zu|^2 <t - r>^{-rho}   (origin node skipped)
      source = 2 int e^eta F(du) . d_t u
    """
    n = u.shape[0]
    width = hi - lo
    P = np.empty((3, n, width))
    F = np.zeros((n, width))
    inv4h = 0.25 / h
    inv_dt = 1.0 / dt
    has_f = q_idx.shape[0] + c_idx.shape[0] > 0
    ghost = 0.0
    zflux = 0.0
    source = 0.0
    for i in range(lo, hi):
        x = x0 + i * h
        for j in range(n):
            uc, ue, uw = u[j, i], u[j, i + 1], u[j, i - 1]
            pc, pe, pw = up[j, i], up[j, i + 1], up[j, i - 1]
            for q in range(width):
                k = lo + q
                P[0, j, q] = (uc[k] - pc[k]) * inv_dt
                P[1, j, q] = (ue[k] - uw[k] + pe[k] - pw[k]) * inv4h
                P[2, j, q] = (uc[k + 1] - uc[k - 1] + pc[k + 1] - pc[k - 1]) * inv4h
        if has_f:
            _eval_f_row(P, q_idx, q_val, c_idx, c_val, F, width)
        for q in range(width):
            d2 = 0.0
            for j in range(n):
                d2 += P[0, j, q] ** 2 + P[1, j, q] ** 2 + P[2, j, q] ** 2
            if d2 == 0.0:
                continue
            y = x0 + (lo + q) * h
            r = math.sqrt(x * x + y * y)
            e_eta = math.exp(_eta(r - t_half, rho_mode, table, z0, dz))
            ghost += e_eta * d2
            if r > 0.0:
                w1 = x / r
                w2 = y / r
                z2 = 0.0
                for j in range(n):
                    z1 = w1 * P[0, j, q] + P[1, j, q]
                    zz = w2 * P[0, j, q] + P[2, j, q]
                    z2 += z1 * z1 + zz * zz
                s2 = 1.0 + (t_half - r) ** 2
                if rho_mode == 2:
                    wz = 1.0 / s2
                else:
                    wz = s2 ** (-0.5 * rho)
                zflux += e_eta * z2 * wz
            if has_f:
                s = 0.0
                for j in range(n):
                    s += F[j, q] * P[0, j, q]
                source += 2.0 * e_eta * s
    h2 = h * h
    return ghost * h2, zflux * h2, source * h2
