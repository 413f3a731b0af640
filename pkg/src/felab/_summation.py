"""Direct O(N^2) sums over particle pairs, compiled with numba.

Every sum is parallel over targets (or over the first index of a pair) and
each target accumulates its sources in index order, so results are bitwise
reproducible for any number of threads.

Kernel ``kind`` codes for the enclosed mass in the velocity kernel:
0 = gaussian closed form, 1 = algebraic blob closed form, 2 = table.
"""
import math

import numpy as np
from numba import njit, prange

from ._tables import hermite_eval

TWO_PI = 2.0 * math.pi
KIND_GAUSSIAN, KIND_BLOB, KIND_TABLE = 0, 1, 2
# m(rho) = 1 to double precision beyond this rho^2 for the gaussian
_GAUSS_RHO2_CUT = 40.0


@njit(cache=True, inline="always")
def _mass(rho2, kind, mdata, mpar):
    if rho2 == 0.0:
        return 0.0
    if kind == 0:
        if rho2 > _GAUSS_RHO2_CUT:
            return 1.0
        return -math.expm1(-rho2)
    if kind == 1:
        return rho2 / (1.0 + rho2)
    return hermite_eval(0.5 * math.log(rho2), mdata, mpar)


def pair_velocities(x, y, gam, eps, kind, mdata, mpar):
    """Velocities induced at the particles themselves (self term is zero)."""
    return target_velocities(x, y, x, y, gam, eps, kind, mdata, mpar)


@njit(cache=True, parallel=True)
def target_velocities(tx, ty, x, y, gam, eps, kind, mdata, mpar):
    nt = tx.size
    n = x.size
    u = np.zeros(nt)
    v = np.zeros(nt)
    inv_e2 = 1.0 / (eps * eps)
    for t in prange(nt):
        a = 0.0
        b = 0.0
        for j in range(n):
            dx = tx[t] - x[j]
            dy = ty[t] - y[j]
            d2 = dx * dx + dy * dy
            if d2 == 0.0:
                continue
            f = _mass(d2 * inv_e2, kind, mdata, mpar) / (TWO_PI * d2) * gam[j]
            a -= dy * f
            b += dx * f
        u[t] = a
        v[t] = b
    return u, v


@njit(cache=True, inline="always")
def _table_at(rho, data, par):
    if rho == 0.0:
        # the left continuation evaluated far below the grid gives the rho -> 0 limit
        return hermite_eval(-745.0, data, par)
    return hermite_eval(math.log(rho), data, par)


@njit(cache=True, parallel=True)
def pair_diagnostics(x, y, gam, u, v, eps, gdata, gpar, hdata, hpar, idata, ipar):
    """Return (pseudo energy, interaction energy, dissipation rate).

    The interaction energy includes the diagonal -1/2 H_G(0) sum Gamma_i^2.
    Row sums over j > i are formed in parallel and added in index order.
    """
    n = x.size
    log_eps = math.log(eps) / TWO_PI
    hg0 = _table_at(0.0, hdata, hpar)
    g0 = _table_at(0.0, gdata, gpar)
    rows = np.zeros((n, 3))
    inv_eps = 1.0 / eps
    for i in prange(n):
        ham = 0.0
        ener = 0.0
        diss = 0.0
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            d2 = dx * dx + dy * dy
            gg = gam[i] * gam[j]
            if d2 == 0.0:
                ham -= (g0 + log_eps) * gg
                ener -= hg0 * gg
                continue
            lu = 0.5 * math.log(d2) + math.log(inv_eps)
            ham -= (hermite_eval(lu, gdata, gpar) + log_eps) * gg
            ener -= hermite_eval(lu, hdata, hpar) * gg
            iv = hermite_eval(lu, idata, ipar)
            diss -= iv / d2 * (dx * (u[i] - u[j]) + dy * (v[i] - v[j])) * gg
        rows[i, 0] = ham
        rows[i, 1] = ener
        rows[i, 2] = diss
    ham = 0.0
    ener = 0.0
    diss = 0.0
    diag = 0.0
    for i in range(n):
        ham += rows[i, 0]
        ener += rows[i, 1]
        diss += rows[i, 2]
        diag += gam[i] * gam[i]
    ener -= 0.5 * hg0 * diag
    return ham, ener, diss


@njit(cache=True, parallel=True)
def target_filtered_sums(tx, ty, x, y, w, eps, cutoff, hdata, hpar, order, cells, cell_size, ox, oy, ncx, ncy):
    """sum_i h^eps(t - x_i) w_i[:, k] for every target and column k.

    Sources are bucketed in square cells (``order`` sorts sources by cell and
    ``cells`` holds the start offsets); only cells within ``cutoff`` of the
    target are visited.  With an infinite cutoff a single cell holds all
    sources.
    """
    nt = tx.size
    nk = w.shape[1]
    out = np.zeros((nt, nk))
    inv_e2 = 1.0 / (eps * eps)
    reach = 0
    if cutoff < 1e300:
        reach = int(math.ceil(cutoff / cell_size))
    for t in prange(nt):
        cx = int(math.floor((tx[t] - ox) / cell_size))
        cy = int(math.floor((ty[t] - oy) / cell_size))
        if reach == 0:
            lo_x, hi_x, lo_y, hi_y = 0, ncx - 1, 0, ncy - 1
        else:
            lo_x = max(cx - reach, 0)
            hi_x = min(cx + reach, ncx - 1)
            lo_y = max(cy - reach, 0)
            hi_y = min(cy + reach, ncy - 1)
        for gy in range(lo_y, hi_y + 1):
            for gx in range(lo_x, hi_x + 1):
                c = gy * ncx + gx
                for p in range(cells[c], cells[c + 1]):
                    j = order[p]
                    dx = tx[t] - x[j]
                    dy = ty[t] - y[j]
                    d = math.sqrt(dx * dx + dy * dy)
                    if d > cutoff:
                        continue
                    hv = _table_at(d / eps, hdata, hpar) * inv_e2
                    for k in range(nk):
                        out[t, k] += hv * w[j, k]
    return out
