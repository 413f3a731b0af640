"""Radial kernel calculus for a filter h.

Everything is built once on a dimensionless log grid in rho = r / eps and
rescaled for each eps:

    m(rho)   enclosed mass 2 pi int_0^rho s h(s) ds
    I(rho)   int_0^rho t H(t) dt,  H = h*h - h
    HG(rho)  -int_rho^inf I(s)/s ds, equal to H_G^eps(eps rho) for every eps
    G1(rho)  the mollified Green function at eps = 1

with the physical kernels

    K^eps(x)      = x^perp m(|x|/eps) / (2 pi |x|^2)
    G^eps(r)      = G1(r/eps) + log(eps) / (2 pi)
    (H_G^eps)'(r) = I(r/eps) / r.
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._tables import HermiteTable, LA, LB, LC, LK, RA, RB, RC, RK
from .filters import RadialFilterSpec
from .quadrature import gauss_legendre, log_rule

__all__ = [
    "GridSpec",
    "RadialCore",
    "KernelTable",
    "build_core",
    "kernel_table",
    "self_convolve_radial",
    "self_convolution",
    "enclosed_mass",
    "filtered_biot_savart",
    "mollified_green",
    "HG_value",
    "grad_HG",
    "weighted_grad_norm",
    "net_mass",
    "decay_constant",
    "hg_by_convolution",
    "corrupt_tail",
    "save_table",
    "load_table",
    "table_to_csv",
    "DivergentNormError",
]

TWO_PI = 2.0 * math.pi
TABLE_MAGIC = b"FELTAB\x00\x01"
TABLE_VERSION = 1


class DivergentNormError(ValueError):
    """The requested weighted norm is infinite."""


@dataclass(frozen=True)
class GridSpec:
    rho_min: float = 1e-6
    rho_max: float = 1e4
    per_decade: int = 128
    gl_order: int = 4

    @property
    def n(self):
        return int(round(math.log10(self.rho_max / self.rho_min) * self.per_decade)) + 1

    @property
    def u(self):
        return np.linspace(math.log(self.rho_min), math.log(self.rho_max), self.n)


# --------------------------------------------------------------------------
# self-convolution of radial profiles


def _hh_half_plane(profile, r, theta_order=32, s_width=1.0, s_order=16):
    """(h*h)(r) from the half of the plane closer to the origin than to x.

    With x = (r, 0) and y = s(cos t, sin t) the set |y| < |x - y| is
    t in (t0, 2 pi - t0), t0 = arccos(min(1, r / 2s)).  By the y <-> x - y
    symmetry the full convolution is twice that integral, and h(|x-y|) is only
    evaluated at distances >= s, away from any singularity of h at 0.
    """
    scale = max(r, 1.0)
    kinks = (0.5 * r, r) if r > 0 else ()
    s, ws = log_rule(1e-10 * scale, 1e6 * scale, width=s_width, order=s_order,
                     kinks=kinks, kink_order=2 * s_order)
    t0 = np.arccos(np.minimum(1.0, r / (2.0 * s)))
    xg, wg = gauss_legendre(theta_order)
    span = (math.pi - t0)[:, None]
    theta = t0[:, None] + 0.5 * span * (xg[None, :] + 1.0)
    wt = 0.5 * span * wg[None, :]
    d = np.sqrt(np.maximum(r * r + s[:, None] ** 2 - 2.0 * r * s[:, None] * np.cos(theta), 0.0))
    inner = np.sum(wt * profile(d), axis=1)
    return 4.0 * np.sum(ws * s * profile(s) * inner)


def _hh_trapezoid(profile, r, n_theta=512, s_width=0.5, s_order=8):
    """(h*h)(r) by the full angular integral with the periodic trapezoid rule."""
    scale = max(r, 1.0)
    kinks = (r,) if r > 0 else ()
    s, ws = log_rule(1e-10 * scale, 1e6 * scale, width=s_width, order=s_order,
                     kinks=kinks, kink_order=2 * s_order)
    theta = TWO_PI * np.arange(n_theta) / n_theta
    d = np.sqrt(np.maximum(r * r + s[:, None] ** 2 - 2.0 * r * s[:, None] * np.cos(theta)[None, :], 0.0))
    inner = profile(d).sum(axis=1) * (TWO_PI / n_theta)
    return np.sum(ws * s * profile(s) * inner)


def self_convolution(spec: RadialFilterSpec, r, method="auto"):
    """Radial profile of h*h at the radii ``r``.

    ``method`` is ``closed`` (builtin closed form), ``half_plane`` (default
    numerical route) or ``trapezoid`` (512-point periodic rule on the full
    circle; refused for filters singular at the origin, where the coincident
    point y = x makes the angular integrand unbounded).
    """
    r = np.asarray(r, dtype=float)
    if method == "auto":
        method = "closed" if spec.self_convolution is not None else "half_plane"
    if method == "closed":
        if spec.self_convolution is None:
            raise ValueError(f"filter {spec.name!r} has no closed-form self-convolution")
        return spec.self_convolution(r)
    if method == "half_plane":
        fn = _hh_half_plane
    elif method == "trapezoid":
        if spec.singular_origin:
            raise ValueError("trapezoid route needs a profile finite at the origin; "
                             "use the half_plane route, which splits the singularity")
        fn = _hh_trapezoid
    else:
        raise ValueError(f"unknown method {method!r}")
    flat = r.ravel()
    out = np.array([fn(spec.profile, float(x)) for x in flat])
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("self-convolution quadrature produced non-finite values")
    return out.reshape(r.shape)


def self_convolve_radial(spec: RadialFilterSpec, method="auto"):
    """Return the radial profile H_r(r) = (h*h)_r(r) - h_r(r) as a callable."""

    def H(r):
        r = np.asarray(r, dtype=float)
        return self_convolution(spec, r, method) - spec.profile(r)

    return H


# --------------------------------------------------------------------------
# dimensionless core


def _local_slope(f, fu):
    with np.errstate(divide="ignore", invalid="ignore"):
        k = fu / f
    return float(k) if np.isfinite(k) else 0.0


def _interval_nodes(u, order):
    x, w = gauss_legendre(order)
    a, b = u[:-1, None], u[1:, None]
    uq = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    wq = 0.5 * (b - a) * w[None, :]
    return uq, wq


def _forward(segments, start):
    out = np.empty(segments.size + 1)
    out[0] = start
    out[1:] = start + np.cumsum(segments)
    return out


def _backward(segments, end):
    out = np.empty(segments.size + 1)
    out[-1] = end
    out[:-1] = end + np.cumsum(segments[::-1])[::-1]
    return out


@dataclass(eq=False)
class RadialCore:
    """Node data and interpolants of the dimensionless kernel functions."""

    filter: RadialFilterSpec
    grid: GridSpec
    nodes: dict
    tables: dict
    net_mass: float
    method: str

    def __getattr__(self, name):
        tables = self.__dict__.get("tables", {})
        if name in tables:
            return tables[name]
        raise AttributeError(name)

    @property
    def rho(self):
        return np.exp(self.grid.u)

    def payload(self):
        keys = sorted(self.nodes)
        return keys, np.stack([np.asarray(self.nodes[k], dtype="<f8") for k in keys])

    def checksum(self):
        keys, arr = self.payload()
        h = hashlib.sha256()
        h.update(",".join(keys).encode())
        h.update(arr.tobytes())
        return h.hexdigest()


def _tail_models(u, n):
    """Build left/right extrapolation tuples for each function."""
    u0, ue = u[0], u[-1]
    m, mu = n["m"][0], n["m_u"][0]
    km = _local_slope(m, mu)
    T, Tu = n["T"][-1], n["T_u"][-1]
    kT = _local_slope(T, Tu)
    I0, Iu0 = n["I"][0], n["I_u"][0]
    kI0 = _local_slope(I0, Iu0)
    Ie, Iue = n["I"][-1], n["I_u"][-1]
    kIe = _local_slope(Ie, Iue)
    models = {}
    models["m"] = ((0.0, 0.0, m, km), (1.0, 0.0, -T, kT))
    models["T"] = ((1.0, 0.0, -m, km), (0.0, 0.0, T, kT))
    models["I"] = ((0.0, 0.0, I0, kI0), (0.0, 0.0, Ie, kIe))
    hg0, hge = n["HG"][0], n["HG"][-1]
    c_left = I0 / kI0 if kI0 != 0 else 0.0
    models["HG"] = ((hg0 - c_left, 0.0, c_left, kI0), (0.0, 0.0, hge, kIe))
    g0, ge = n["G1"][0], n["G1"][-1]
    cg = m / (TWO_PI * km) if km != 0 else 0.0
    models["G1"] = ((g0 - cg, 0.0, cg, km), (0.0, 1.0 / TWO_PI, ge - ue / TWO_PI, kT))
    h0, hu0 = n["h"][0], n["h_u"][0]
    he, hue = n["h"][-1], n["h_u"][-1]
    models["h"] = ((0.0, 0.0, h0, _local_slope(h0, hu0)), (0.0, 0.0, he, _local_slope(he, hue)))
    return models


def _make_tables(grid, nodes):
    u = grid.u
    du = u[1] - u[0]
    models = _tail_models(u, nodes)
    tables = {}
    for name in ("m", "T", "I", "HG", "G1", "h"):
        left, right = models[name]
        tables[name] = HermiteTable(u[0], du, nodes[name], nodes[name + "_u"], left, right)
    return tables


def build_core(spec: RadialFilterSpec, grid: GridSpec = GridSpec(), method="auto"):
    """Tabulate m, T, I, HG and G1 for ``spec`` on the dimensionless grid."""
    u = grid.u
    du = u[1] - u[0]
    rho = np.exp(u)
    uq, wq = _interval_nodes(u, grid.gl_order)
    rq = np.exp(uq)
    h = spec.profile
    nodes = {}

    # profile
    h_n = h(rho)
    nodes["h"] = h_n
    nodes["h_u"] = rho * spec.dprofile(rho)

    # enclosed mass and tail mass
    f_u = TWO_PI * rho**2 * h_n
    if spec.enclosed_mass is not None and spec.tail_mass is not None:
        m_n, T_n = spec.enclosed_mass(rho), spec.tail_mass(rho)
        m_q, T_q = spec.enclosed_mass(rq), spec.tail_mass(rq)
    else:
        seg = np.sum(wq * TWO_PI * rq**2 * h(rq), axis=1)
        k0 = _local_slope(h_n[0], nodes["h_u"][0])
        M = _forward(seg, TWO_PI * h_n[0] * rho[0] ** 2 / (k0 + 2.0))
        ke = _local_slope(h_n[-1], nodes["h_u"][-1])
        tail = 0.0 if h_n[-1] == 0 else TWO_PI * h_n[-1] * rho[-1] ** 2 / (-ke - 2.0)
        Tb = _backward(seg, tail)
        inner = rho <= 1.0
        m_n = np.where(inner, M, 1.0 - Tb)
        T_n = np.where(inner, 1.0 - M, Tb)
        m_q = T_q = None
    nodes["m"], nodes["m_u"] = m_n, f_u
    nodes["T"], nodes["T_u"] = T_n, -f_u
    if m_q is None:
        tabs = _make_tables_partial(grid, nodes, ("m", "T"))
        m_q, T_q = tabs["m"](rq), tabs["T"](rq)

    # self-convolution and I = int_0^rho t H dt
    if method == "auto":
        method = "closed" if spec.self_convolution is not None else "half_plane"
    hh_n = self_convolution(spec, rho, method)
    hh_q = self_convolution(spec, rq, method)
    nodes["hh"] = hh_n
    seg2 = np.sum(wq * TWO_PI * rq**2 * hh_q, axis=1)
    M2 = _forward(seg2, math.pi * rho[0] ** 2 * hh_n[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        k2 = math.log(hh_n[-1] / hh_n[-2]) / du if hh_n[-1] > 0 and hh_n[-2] > 0 else -np.inf
    tail2 = 0.0 if not np.isfinite(k2) else TWO_PI * hh_n[-1] * rho[-1] ** 2 / (-k2 - 2.0)
    net = M2[-1] + tail2 - (m_n[-1] + T_n[-1])
    closed_I = (spec.self_convolution_tail_mass is not None and method == "closed")
    # forward integration near the origin avoids cancellation in 1 - T2
    I_n = (M2 - m_n) / TWO_PI
    if closed_I:
        outer = rho > 1.0
        I_n[outer] = (T_n[outer] - spec.self_convolution_tail_mass(rho[outer])) / TWO_PI
    nodes["I"] = I_n
    nodes["I_u"] = rho**2 * (hh_n - h_n)
    I_q = _make_tables_partial(grid, nodes, ("I",))["I"](rq)
    if closed_I:
        oq = rq > 1.0
        I_q[oq] = (T_q[oq] - spec.self_convolution_tail_mass(rq[oq])) / TWO_PI

    # HG = -int_rho^inf I(s)/s ds, integrated in u
    kIe = _local_slope(I_n[-1], nodes["I_u"][-1])
    hg_end = I_n[-1] / kIe if (I_n[-1] != 0 and kIe < 0) else 0.0
    nodes["HG"] = _backward(-np.sum(wq * I_q, axis=1), hg_end)
    nodes["HG_u"] = I_n

    # G1 = (log rho + int_rho^inf T/t dt) / 2 pi, continued inward with m
    kTe = _local_slope(T_n[-1], nodes["T_u"][-1])
    q_end = T_n[-1] / -kTe if (T_n[-1] != 0 and kTe < 0) else 0.0
    Q = _backward(np.sum(wq * T_q, axis=1), q_end)
    G_out = (u + Q) / TWO_PI
    i1 = int(np.searchsorted(rho, 1.0))
    seg_m = np.sum(wq * m_q, axis=1) / TWO_PI
    G = G_out.copy()
    G[:i1 + 1] = G_out[i1] - _backward(seg_m[:i1], 0.0)
    nodes["G1"] = G
    nodes["G1_u"] = m_n / TWO_PI

    tables = _make_tables(grid, nodes)
    return RadialCore(spec, grid, nodes, tables, float(net), method)


def _make_tables_partial(grid, nodes, names):
    u = grid.u
    du = u[1] - u[0]
    out = {}
    for name in names:
        f, fu = nodes[name], nodes[name + "_u"]
        left = (0.0, 0.0, f[0], _local_slope(f[0], fu[0]))
        if name == "m":
            T, Tu = nodes["T"][-1], nodes["T_u"][-1]
            right = (1.0, 0.0, -T, _local_slope(T, Tu))
        else:
            right = (0.0, 0.0, f[-1], _local_slope(f[-1], fu[-1]))
        out[name] = HermiteTable(u[0], du, f, fu, left, right)
    return out


_CORE_CACHE = {}


def get_core(spec: RadialFilterSpec, grid: GridSpec = GridSpec(), method="auto"):
    key = (spec.key, grid, method)
    core = _CORE_CACHE.get(key)
    if core is None:
        core = build_core(spec, grid, method)
        _CORE_CACHE[key] = core
    return core


# --------------------------------------------------------------------------
# physical tables


@dataclass(frozen=True, eq=False)
class KernelTable:
    eps: float
    core: RadialCore

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def filter(self):
        return self.core.filter

    @property
    def rho_grid(self):
        return self.core.rho

    @property
    def r_grid(self):
        return self.eps * self.core.rho

    @property
    def m(self):
        return self.core.nodes["m"]

    @property
    def I(self):
        return self.core.nodes["I"]

    @property
    def HG(self):
        return self.core.nodes["HG"]

    @property
    def dHG(self):
        return self.core.nodes["I"] / self.r_grid

    @property
    def Geps(self):
        return self.core.nodes["G1"] + math.log(self.eps) / TWO_PI

    @property
    def tail(self):
        return {name: {"left": t.par[LA:LK + 1].tolist(), "right": t.par[RA:RK + 1].tolist()}
                for name, t in self.core.tables.items()}

    def checksum(self):
        return self.core.checksum()

    # dimensionless lookups
    def enclosed_mass(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.filter.enclosed_mass is not None:
            return np.asarray(self.filter.enclosed_mass(rho), dtype=float)
        return np.where(rho == 0, 0.0, self.core.tables["m"](rho))

    def I_of(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho == 0, 0.0, self.core.tables["I"](rho))


def kernel_table(spec: RadialFilterSpec, eps: float, grid: GridSpec = GridSpec(), method="auto"):
    return KernelTable(float(eps), get_core(spec, grid, method))


def enclosed_mass(spec: RadialFilterSpec, rho):
    """2 pi int_0^rho s h(s) ds (closed form when the filter provides one)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    if spec.enclosed_mass is not None:
        out = spec.enclosed_mass(rho)
    else:
        out = np.where(rho == 0, 0.0, get_core(spec).tables["m"](rho))
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def filtered_biot_savart(table: KernelTable, x):
    """K^eps(x) = x^perp m(|x|/eps) / (2 pi |x|^2); zero at the origin."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    r = np.sqrt(r2)
    m = table.enclosed_mass(r / table.eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(r2 > 0, m / (TWO_PI * r2), 0.0)
    perp = np.stack([-x[..., 1], x[..., 0]], axis=-1)
    return perp * f[..., None]


def mollified_green(table: KernelTable, r):
    """G^eps(r) = G1(r/eps) + log(eps)/(2 pi), finite at r = 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    out = table.core.tables["G1"](r / table.eps) + math.log(table.eps) / TWO_PI
    return out if out.ndim else float(out)


def HG_value(table: KernelTable, r):
    """H_G^eps(r); depends on r only through r/eps."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    out = table.core.tables["HG"](r / table.eps)
    return out if out.ndim else float(out)


def grad_HG(table: KernelTable, r):
    """(H_G^eps)'(r) = I(r/eps)/r, with value 0 at r = 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r > 0, table.I_of(r / table.eps) / r, 0.0)
    return out if out.ndim else float(out)


def weighted_grad_norm(table: KernelTable, a: float, q: float):
    """|| |x|^a grad H_G^eps ||_{L^q(R^2)} by radial quadrature.

    Near 0 the decay bound gives |grad H_G^eps| <= C/r, so convergence is
    required of r^(aq+1-q); at infinity |grad H_G^eps| <= C eps / r^2.
    """
    eps = table.eps
    core = table.core
    u = core.grid.u
    rho = core.rho
    I_n = core.nodes["I"]
    if math.isinf(q):
        if a > 1 or a < 0:
            end = "infinity" if a > 1 else "zero"
            raise DivergentNormError(f"sup of r^{a}|grad H_G| is unbounded at {end}")
        rr = np.geomspace(core.grid.rho_min, core.grid.rho_max, 20001)
        return float(eps ** (a - 1) * np.max(rr ** (a - 1) * np.abs(table.I_of(rr))))
    if q < 1:
        raise ValueError("q must be >= 1")
    if not a * q + 1 - q > -1:
        raise DivergentNormError(
            f"integrand r^(aq+1)|grad H_G|^q is not integrable at zero (aq+1-q = {a*q+1-q:g} <= -1)")
    if not a * q + 1 - 2 * q < -1:
        raise DivergentNormError(
            f"integrand r^(aq+1)|grad H_G|^q is not integrable at infinity (aq+1-2q = {a*q+1-2*q:g} >= -1)")
    p = a * q + 2 - q  # integrand in u is rho^p |I|^q
    uq, wq = _interval_nodes(u, core.grid.gl_order)
    Iq = core.tables["I"](np.exp(uq))
    body = np.sum(wq * np.exp(p * uq) * np.abs(Iq) ** q)
    kl = _local_slope(I_n[0], core.nodes["I_u"][0])
    sl = p + q * kl
    left = rho[0] ** p * abs(I_n[0]) ** q / sl if sl > 0 else math.inf
    if I_n[-1] == 0:
        right = 0.0
    else:
        kr = _local_slope(I_n[-1], core.nodes["I_u"][-1])
        sr = p + q * kr
        right = rho[-1] ** p * abs(I_n[-1]) ** q / -sr if sr < 0 else math.inf
    J = TWO_PI * (left + body + right)
    return float(eps ** (p / q) * J ** (1.0 / q))


# --------------------------------------------------------------------------
# checks used by the kernel property suite


def net_mass(table_or_core):
    """2 pi I(inf): forward integral of 2 pi t H(t) plus a power-law tail."""
    core = getattr(table_or_core, "core", table_or_core)
    return core.net_mass


def decay_constant(table: KernelTable, window=(1e-4, 1e2)):
    """max over r in the window of r (r + eps)/eps |(H_G^eps)'(r)| = (1+rho)|I(rho)|."""
    core = table.core
    lo, hi = window[0] / table.eps, window[1] / table.eps
    rho = core.rho
    sel = (rho >= lo) & (rho <= hi)
    pts = np.concatenate([[max(lo, rho[0])], rho[sel], [min(hi, rho[-1])]])
    vals = (1.0 + pts) * np.abs(table.I_of(pts))
    k = int(np.argmax(vals))
    a, b = pts[max(k - 1, 0)], pts[min(k + 1, pts.size - 1)]
    if b <= a:
        return float(vals[k])
    # refine between the neighbouring nodes on the interpolant
    res = optimize.minimize_scalar(lambda x: -(1.0 + x) * abs(float(table.I_of(x))), bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-12 * b})
    return float(max(vals[k], -res.fun))


def hg_by_convolution(table: KernelTable, r, n_theta=512):
    """H_G^eps(r) = (h^eps * G^eps)(r) - G^eps(r) by direct 2D quadrature.

    Uses the Green function table (built from the enclosed mass) and never
    touches I or HG, so agreement with HG_value checks the whole chain.
    """
    spec = table.filter
    G1 = table.core.tables["G1"]
    rho = float(r) / table.eps
    scale = max(rho, 1.0)
    kinks = (rho,) if rho > 0 else ()
    s, ws = log_rule(1e-10 * scale, 1e6 * scale, width=0.25, order=10, kinks=kinks, kink_order=20)
    theta = TWO_PI * np.arange(n_theta) / n_theta
    d = np.sqrt(np.maximum(rho * rho + s[:, None] ** 2 - 2 * rho * s[:, None] * np.cos(theta)[None, :], 0.0))
    g = G1(np.maximum(d, 1e-300))
    ang = g.mean(axis=1) * TWO_PI
    conv = np.sum(ws * s * spec.profile(s) * ang)
    return float(conv - G1(np.array([rho]))[0])


def corrupt_tail(spec: RadialFilterSpec, rho_cut=2.0):
    """Copy of ``spec`` whose self-convolution is zeroed beyond ``rho_cut``."""
    hh = spec.self_convolution
    if hh is None:
        def hh(r, _s=spec):
            return self_convolution(_s, r, "half_plane")

    def cut(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= rho_cut, hh(r), 0.0)

    return dataclasses.replace(spec, name=spec.name + "_tail_zeroed", self_convolution=cut,
                               self_convolution_tail_mass=None)


# --------------------------------------------------------------------------
# serialization


def save_table(table: KernelTable, path):
    """Versioned binary: magic, header length, JSON header, float64 payload."""
    keys, arr = table.core.payload()
    grid = table.core.grid
    header = {
        "version": TABLE_VERSION,
        "filter": table.filter.name,
        "params": dict(table.filter.params),
        "eps": table.eps,
        "grid": dataclasses.asdict(grid),
        "method": table.core.method,
        "net_mass": table.core.net_mass,
        "arrays": keys,
        "shape": list(arr.shape),
        "sha256": table.core.checksum(),
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        fh.write(arr.astype("<f8").tobytes())
    return header["sha256"]


def load_table(path, spec: RadialFilterSpec | None = None):
    """Read a table written by ``save_table``; the checksum is verified."""
    from .filters import builtin_filter

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(TABLE_MAGIC)] != TABLE_MAGIC:
        raise ValueError("not a kernel table file")
    off = len(TABLE_MAGIC)
    (hlen,) = struct.unpack("<I", raw[off:off + 4])
    off += 4
    header = json.loads(raw[off:off + hlen])
    off += hlen
    if header["version"] != TABLE_VERSION:
        raise ValueError(f"unsupported table version {header['version']}")
    arr = np.frombuffer(raw[off:], dtype="<f8").reshape(header["shape"])
    nodes = {k: arr[i].copy() for i, k in enumerate(header["arrays"])}
    if spec is None:
        spec = builtin_filter(header["filter"], header["params"])
    grid = GridSpec(**header["grid"])
    core = RadialCore(spec, grid, nodes, _make_tables(grid, nodes), header["net_mass"], header["method"])
    if core.checksum() != header["sha256"]:
        raise ValueError("kernel table checksum mismatch")
    return KernelTable(float(header["eps"]), core)


def table_to_csv(table: KernelTable, path=None):
    """Inspection dump: rho, r, m, I, HG, dHG, G^eps."""
    buf = io.StringIO()
    buf.write(f"# filter={table.filter.name} eps={table.eps!r} sha256={table.checksum()}\n")
    buf.write("rho,r,m,I,HG,dHG,Geps\n")
    cols = np.column_stack([table.rho_grid, table.r_grid, table.m, table.I, table.HG,
                            table.dHG, table.Geps])
    np.savetxt(buf, cols, delimiter=",", fmt="%.17g")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
