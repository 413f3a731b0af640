"""Radial filter functions h, their scaled versions h^eps, and certificates.

A filter is stored only through its radial profile ``h_r``; radial symmetry is
therefore structural.  Builtins carry closed forms where they exist (enclosed
mass, self-convolution and the corresponding tail masses), which the kernel
engine uses in place of quadrature.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate, special

__all__ = [
    "RadialFilterSpec",
    "FilterValidationReport",
    "ConditionResult",
    "ValidationTolerances",
    "DomainError",
    "builtin_filter",
    "validate_filter",
    "scaled_profile",
    "BUILTIN_FILTERS",
]

BUILTIN_FILTERS = ("gaussian", "algebraic_blob", "euler_alpha")


class DomainError(ValueError):
    """Evaluation requested at a point where the profile is singular."""


@dataclass(frozen=True, eq=False)
class RadialFilterSpec:
    name: str
    profile: Callable[[np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    alpha: float = 0.0
    derivative: Optional[Callable] = None
    enclosed_mass: Optional[Callable] = None
    tail_mass: Optional[Callable] = None
    self_convolution: Optional[Callable] = None
    self_convolution_tail_mass: Optional[Callable] = None
    singular_origin: bool = False
    support_radius: float = math.inf

    @property
    def closed_forms(self):
        names = ("enclosed_mass", "tail_mass", "self_convolution",
                 "self_convolution_tail_mass", "derivative")
        return tuple(n for n in names if getattr(self, n) is not None)

    @property
    def key(self):
        params = tuple(sorted((k, float(v)) for k, v in self.params.items()))
        if self.name in BUILTIN_FILTERS:
            return (self.name, params)
        return (self.name, params, id(self.profile))

    def __call__(self, r):
        return self.profile(np.asarray(r, dtype=float))

    def dprofile(self, r):
        """Radial derivative h_r'(r); central differences if no closed form."""
        r = np.asarray(r, dtype=float)
        if self.derivative is not None:
            return self.derivative(r)
        step = 1e-6 * np.maximum(r, 1e-8)
        return (self.profile(r + step) - self.profile(r - step)) / (2 * step)

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params), "alpha": self.alpha}


def _gaussian():
    inv_pi = 1.0 / math.pi
    return dict(
        profile=lambda r: inv_pi * np.exp(-r * r),
        derivative=lambda r: -2.0 * inv_pi * r * np.exp(-r * r),
        enclosed_mass=lambda p: -np.expm1(-p * p),
        tail_mass=lambda p: np.exp(-p * p),
        self_convolution=lambda r: np.exp(-0.5 * r * r) / (2.0 * math.pi),
        self_convolution_tail_mass=lambda p: np.exp(-0.5 * p * p),
        support_radius=6.5,
    )


def _algebraic_blob():
    inv_pi = 1.0 / math.pi
    return dict(
        profile=lambda r: inv_pi / (1.0 + r * r) ** 2,
        derivative=lambda r: -4.0 * inv_pi * r / (1.0 + r * r) ** 3,
        enclosed_mass=lambda p: p * p / (1.0 + p * p),
        tail_mass=lambda p: 1.0 / (1.0 + p * p),
    )


def _k1_times(p):
    # p K_1(p) with its p -> 0 limit
    p = np.asarray(p, dtype=float)
    out = np.ones_like(p)
    nz = p > 0
    out[nz] = p[nz] * special.k1(p[nz])
    return out


def _p2_k2(p):
    p = np.asarray(p, dtype=float)
    out = np.full_like(p, 2.0)
    nz = p > 0
    out[nz] = p[nz] ** 2 * special.kn(2, p[nz])
    return out


def _euler_alpha():
    # Green function of (1 - Laplacian): h = K_0(r) / (2 pi)
    two_pi = 2.0 * math.pi
    return dict(
        profile=lambda r: special.k0(r) / two_pi,
        derivative=lambda r: -special.k1(r) / two_pi,
        enclosed_mass=lambda p: 1.0 - _k1_times(p),
        tail_mass=_k1_times,
        self_convolution=lambda r: _k1_times(r) / (2.0 * two_pi),
        self_convolution_tail_mass=lambda p: 0.5 * _p2_k2(p),
        singular_origin=True,
        support_radius=40.0,
    )


_BUILDERS = {
    "gaussian": (_gaussian, 0.0),
    "algebraic_blob": (_algebraic_blob, 0.0),
    "euler_alpha": (_euler_alpha, 0.5),
}


def builtin_filter(name, params=None, **kwargs):
    """Return one of the builtin filters.

    ``params`` may contain ``alpha``, the declared exponent for which
    ``|x|^alpha h`` is bounded.  It must lie in [0, 1) and, for the
    logarithmically singular ``euler_alpha`` profile, be strictly positive.
    """
    if name not in _BUILDERS:
        raise ValueError(
            f"unknown filter {name!r}; expected one of {', '.join(BUILTIN_FILTERS)}")
    params = dict(params or {}, **kwargs)
    unknown = set(params) - {"alpha"}
    if unknown:
        raise ValueError(f"invalid parameter(s) for {name}: {sorted(unknown)}")
    build, default_alpha = _BUILDERS[name]
    alpha = float(params.get("alpha", default_alpha))
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if name == "euler_alpha" and alpha <= 0.0:
        raise ValueError("euler_alpha needs alpha > 0 (the profile is log-singular at 0)")
    return RadialFilterSpec(name=name, params={"alpha": alpha}, alpha=alpha, **build())


def scaled_profile(spec, eps, r):
    """h^eps(r) = eps^-2 h_r(r / eps)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    if spec.singular_origin and np.any(r == 0):
        raise DomainError(f"filter {spec.name!r} is singular at the origin")
    out = spec.profile(r / eps) / eps**2
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationTolerances:
    mass: float = 1e-10
    epsabs: float = 1e-10
    epsrel: float = 1e-8
    r_min: float = 1e-8
    r_max: float = 1e8
    n_sup: int = 4096
    # relative growth over the last decade that counts as "increasing"
    growth: float = 1e-9
    # successive shell contributions must shrink at least by this factor
    shell_ratio: float = 0.5


@dataclass
class ConditionResult:
    name: str
    measured: float
    threshold: float
    status: str
    error_estimate: float = 0.0
    note: str = ""

    @property
    def passed(self):
        return self.status == "pass"


@dataclass
class FilterValidationReport:
    filter: str
    params: dict
    alpha: float
    conditions: dict

    @property
    def passed(self):
        return all(c.passed for c in self.conditions.values())

    @property
    def inconclusive(self):
        return [n for n, c in self.conditions.items() if c.status == "inconclusive"]

    def to_dict(self):
        return {
            "filter": self.filter,
            "params": self.params,
            "alpha": self.alpha,
            "passed": self.passed,
            "conditions": {
                n: {
                    "measured": c.measured,
                    "threshold": c.threshold,
                    "status": c.status,
                    "error_estimate": c.error_estimate,
                    "note": c.note,
                }
                for n, c in self.conditions.items()
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _quad_log(g, a, b, tol):
    """int_a^b g(r) dr via u = log r; returns (value, abserr, converged)."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                lambda u: float(g(np.exp(u)) * np.exp(u)), math.log(a), math.log(b),
                epsabs=tol.epsabs, epsrel=tol.epsrel, limit=400)
            ok = True
        except integrate.IntegrationWarning:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = integrate.quad(
                    lambda u: float(g(np.exp(u)) * np.exp(u)), math.log(a), math.log(b),
                    epsabs=tol.epsabs, epsrel=tol.epsrel, limit=400)
            ok = False
    if not np.isfinite(val):
        ok = False
    return val, err, ok


def _check_integral(name, g, tol):
    """Finiteness of int_0^inf g(r) dr by nested-shell convergence."""
    core, err, ok = _quad_log(g, 1e-2, 1e2, tol)
    decades = [(1e-2, 1e-4), (1e-4, 1e-6), (1e-6, tol.r_min)]
    inner = []
    for hi, lo in decades:
        v, e, o = _quad_log(g, lo, hi, tol)
        inner.append(abs(v))
        err += e
        ok = ok and o
        core += v
    outer = []
    for lo, hi in [(1e2, 1e4), (1e4, 1e6), (1e6, tol.r_max)]:
        v, e, o = _quad_log(g, lo, hi, tol)
        outer.append(abs(v))
        err += e
        ok = ok and o
        core += v

    def shrinking(shells):
        floor = max(tol.epsabs, tol.epsrel * abs(core))
        return all(b <= floor or b <= tol.shell_ratio * a for a, b in zip(shells, shells[1:]))

    finite = shrinking(inner) and shrinking(outer)
    # geometric extrapolation of the truncated tails beyond the last shells
    tails = 0.0
    for shells in (inner, outer):
        a, b = shells[-2], shells[-1]
        if finite and a > 0 and b < a:
            tails += b * (b / a) / (1.0 - b / a)
    core += tails
    if not ok:
        status = "inconclusive" if finite else "fail"
    else:
        status = "pass" if finite else "fail"
    note = "" if finite else "shell contributions do not decay (divergent integral)"
    if not ok:
        note = (note + "; " if note else "") + "quadrature did not converge"
    return ConditionResult(name, core, math.inf, status, err + outer[-1] + inner[-1], note)


def _check_sup(name, g, tol):
    r = np.geomspace(tol.r_min, tol.r_max, tol.n_sup)
    with np.errstate(all="ignore"):
        v = np.abs(np.asarray(g(r), dtype=float))
    if not np.all(np.isfinite(v)):
        return ConditionResult(name, math.inf, math.inf, "fail", 0.0, "non-finite samples")
    per_decade = tol.n_sup // 16
    lo_in, hi_in = v[per_decade], v[-1 - per_decade]
    grows_low = v[0] > lo_in * (1 + tol.growth) + tol.epsabs
    grows_high = v[-1] > hi_in * (1 + tol.growth) + tol.epsabs
    sup = float(v.max())
    if grows_low or grows_high:
        end = "r -> 0" if grows_low else "r -> inf"
        return ConditionResult(name, sup, math.inf, "fail", 0.0, f"unbounded growth as {end}")
    return ConditionResult(name, sup, math.inf, "pass", 0.0, "")


def validate_filter(spec, tol=None):
    """Certify unit mass and the moment/regularity conditions on h.

    Integrability is judged from nested shells in r: a finite integral has
    shell contributions that shrink geometrically, a divergent one does not.
    Suprema are sampled on a log grid; growth toward either end of the grid
    marks the weighted profile as unbounded.
    """
    tol = tol or ValidationTolerances()
    h = spec.profile
    dh = spec.dprofile
    two_pi = 2.0 * math.pi
    conds = {}

    mass = _check_integral("unit_mass", lambda r: two_pi * r * h(r), tol)
    dev = abs(mass.measured - 1.0)
    if mass.status == "inconclusive":
        status = "inconclusive"
    else:
        status = "pass" if (mass.status == "pass" and dev <= tol.mass) else "fail"
    conds["unit_mass"] = ConditionResult(
        "unit_mass", mass.measured, tol.mass, status, mass.error_estimate,
        f"|mass - 1| = {dev:.3e}")

    conds["w1_h_L1"] = _check_integral(
        "w1_h_L1", lambda r: two_pi * r * r * np.abs(h(r)), tol)
    conds["grad_h_L1"] = _check_integral(
        "grad_h_L1", lambda r: two_pi * r * np.abs(dh(r)), tol)
    a = spec.alpha
    conds["w_alpha_h_Linf"] = _check_sup(
        "w_alpha_h_Linf", lambda r: r**a * h(r), tol)
    conds["w3_h_Linf"] = _check_sup("w3_h_Linf", lambda r: r**3 * h(r), tol)
    conds["w1_grad_h_Linf"] = _check_sup("w1_grad_h_Linf", lambda r: r * dh(r), tol)
    return FilterValidationReport(spec.name, dict(spec.params), spec.alpha, conds)
