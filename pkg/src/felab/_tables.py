"""Packed quintic Hermite tables on a uniform grid in u = log(rho).

Each table stores node values, exact u-derivatives and second u-derivatives
obtained by fourth-order differencing of the exact first derivatives.  Sign-definite
functions are interpolated in log-magnitude, which reproduces power laws
exactly and keeps relative accuracy in super-exponential tails.  Outside
the grid the function is continued by the model ``a + b u + c exp(k (u - u_ref))``
whose coefficients are fixed at build time from the end-node value and slope.
"""
import math

import numpy as np
from numba import njit

# layout of the parameter vector
U0, DU, N, LOGMODE, SIGN, NZ_END = 0, 1, 2, 3, 4, 5
LA, LB, LC, LK = 6, 7, 8, 9
RA, RB, RC, RK = 10, 11, 12, 13
NPAR = 14


def _second_derivative(g, du):
    """Fourth-order differences of node slopes (one-sided near the ends)."""
    n = g.size
    if n < 5:
        return np.gradient(g, du)
    out = np.empty(n)
    out[2:-2] = (-g[4:] + 8 * g[3:-1] - 8 * g[1:-3] + g[:-4]) / (12 * du)
    out[0] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12 * du)
    out[1] = (-3 * g[0] - 10 * g[1] + 18 * g[2] - 6 * g[3] + g[4]) / (12 * du)
    out[-1] = (25 * g[-1] - 48 * g[-2] + 36 * g[-3] - 16 * g[-4] + 3 * g[-5]) / (12 * du)
    out[-2] = (3 * g[-1] + 10 * g[-2] - 18 * g[-3] + 6 * g[-4] - g[-5]) / (12 * du)
    return out


def pack(u0, du, f, fu, left, right):
    """Build (data, params) for node values ``f`` with u-derivatives ``fu``.

    ``left`` and ``right`` are (a, b, c, k) tuples of the extrapolation model.
    """
    f = np.asarray(f, dtype=float)
    fu = np.asarray(fu, dtype=float)
    n = f.size
    nz = np.flatnonzero(f != 0.0)
    logmode = False
    sign = 1.0
    nz_end = n - 1
    if nz.size and nz[0] == 0:
        s = np.sign(f[nz])
        contiguous = nz[-1] - nz[0] + 1 == nz.size
        if np.all(s == s[0]) and contiguous:
            logmode = True
            sign = float(s[0])
            nz_end = int(nz[-1])
    data = np.zeros((3, n))
    if logmode:
        with np.errstate(divide="ignore", invalid="ignore"):
            data[0] = np.where(f != 0, np.log(np.abs(f)), -np.inf)
            data[1] = np.where(f != 0, fu / f, 0.0)
        m = nz_end + 1
        data[2, :m] = _second_derivative(data[1, :m], du)
    else:
        data[0] = f
        data[1] = fu
        data[2] = _second_derivative(fu, du)
    par = np.zeros(NPAR)
    par[U0], par[DU], par[N] = u0, du, n
    par[LOGMODE], par[SIGN], par[NZ_END] = float(logmode), sign, nz_end
    par[LA:LK + 1] = left
    par[RA:RK + 1] = right
    return np.ascontiguousarray(data), par


@njit(cache=True, fastmath=False)
def hermite_eval(u, data, par):
    u0 = par[0]
    du = par[1]
    n = int(par[2])
    u_end = u0 + (n - 1) * du
    if u < u0:
        return par[6] + par[7] * u + par[8] * math.exp(par[9] * (u - u0))
    if u > u_end:
        return par[10] + par[11] * u + par[12] * math.exp(par[13] * (u - u_end))
    t = (u - u0) / du
    i = int(t)
    if i > n - 2:
        i = n - 2
    s = t - i
    logmode = par[3] != 0.0
    if logmode and i + 1 > int(par[5]):
        return 0.0
    g0 = data[0, i]
    g1 = data[0, i + 1]
    d0 = data[1, i] * du
    d1 = data[1, i + 1] * du
    a0 = data[2, i] * du * du
    a1 = data[2, i + 1] * du * du
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    s5 = s4 * s
    val = ((1 - 10 * s3 + 15 * s4 - 6 * s5) * g0
           + (s - 6 * s3 + 8 * s4 - 3 * s5) * d0
           + 0.5 * (s2 - 3 * s3 + 3 * s4 - s5) * a0
           + 0.5 * (s3 - 2 * s4 + s5) * a1
           + (-4 * s3 + 7 * s4 - 3 * s5) * d1
           + (10 * s3 - 15 * s4 + 6 * s5) * g1)
    if logmode:
        return par[4] * math.exp(val)
    return val


@njit(cache=True)
def hermite_eval_many(u, data, par):
    out = np.empty(u.size)
    for j in range(u.size):
        out[j] = hermite_eval(u[j], data, par)
    return out


class HermiteTable:
    """Python handle around one packed table."""

    def __init__(self, u0, du, f, fu, left=(0.0, 0.0, 0.0, 0.0), right=(0.0, 0.0, 0.0, 0.0)):
        self.data, self.par = pack(u0, du, f, fu, left, right)

    @property
    def logmode(self):
        return bool(self.par[LOGMODE])

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        flat = rho.ravel()
        out = np.empty(flat.size)
        pos = flat > 0
        with np.errstate(divide="ignore"):
            out[pos] = hermite_eval_many(np.log(flat[pos]), self.data, self.par)
        # rho = 0: the left continuation far below the grid gives the limit
        out[flat == 0] = hermite_eval(-745.0, self.data, self.par)
        out[flat < 0] = np.nan
        return out.reshape(rho.shape)
