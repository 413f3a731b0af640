"""epsilon sweeps, power-law rate fits, the Euler-limit study and the kernel
property suite.

All exponents are reported as decay rates: a fitted exponent k means the
measured quantity behaves like C eps^k.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats

from . import fields as F
from . import kernels as K
from .filters import builtin_filter
from .particles import InitialVorticitySpec, SimulationConfig, SimulationError, discretize, simulate

__all__ = [
    "FitResult",
    "SweepConfig",
    "SweepReport",
    "LimitStudyConfig",
    "as_fraction",
    "dissipation_exponent",
    "onsager_exponent",
    "fit_decay_rate",
    "run_sweep",
    "euler_limit_study",
    "verify_appendix",
    "monotone_verdict",
]


def as_fraction(p):
    """Exact rational from an int, Fraction, decimal literal or "a/b" string."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        if math.isinf(p):
            raise ValueError("infinite exponent has no rational form")
        return Fraction(repr(p))
    return Fraction(str(p))


def dissipation_exponent(p):
    """6 (2/3 - 1/p), exact for rational p; p = inf gives 4."""
    if isinstance(p, float) and math.isinf(p):
        return Fraction(4)
    return 6 * (Fraction(2, 3) - 1 / as_fraction(p))


def onsager_exponent(a):
    """a - 1/3."""
    return as_fraction(a) - Fraction(1, 3)


# --------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor: float
    r2: float
    stderr: float
    window: tuple
    verdict: str = "fit"

    def to_dict(self):
        return asdict(self)


def fit_decay_rate(pairs, window=None):
    """Least-squares line through (log eps, log value).

    ``window`` keeps the pairs with the smallest ``window`` eps values.  All
    values zero short-circuits to an "exact zero" verdict; a mixture of zero
    or negative values with positive ones is rejected.
    """
    pairs = sorted(((float(e), float(v)) for e, v in pairs), key=lambda t: -t[0])
    if window is not None:
        pairs = pairs[-int(window):]
    if len(pairs) < 3:
        raise ValueError("a rate fit needs at least 3 pairs")
    eps = np.array([p[0] for p in pairs])
    val = np.array([p[1] for p in pairs])
    if np.any(eps <= 0):
        raise ValueError("eps values must be positive")
    win = tuple(float(e) for e in eps)
    if np.all(val == 0):
        return FitResult(math.inf, 0.0, 1.0, 0.0, win, "exact zero")
    if np.any(val <= 0):
        raise ValueError("values must be all positive or all zero")
    lr = stats.linregress(np.log(eps), np.log(val))
    r2 = float(lr.rvalue**2) if np.ptp(np.log(val)) > 0 else 1.0
    return FitResult(float(lr.slope), float(math.exp(lr.intercept)), r2, float(lr.stderr), win)


def monotone_verdict(values, allowance=0.10):
    """Decreasing sequence with at most one inversion of relative size <= allowance."""
    inv = []
    for k in range(1, len(values)):
        if values[k] > values[k - 1]:
            rel = (values[k] - values[k - 1]) / max(abs(values[k - 1]), 1e-300)
            inv.append(rel)
    ok = len(inv) == 0 or (len(inv) == 1 and inv[0] <= allowance)
    return ok, inv


# --------------------------------------------------------------------------
# sweeps


def _hash(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


@dataclass
class SweepConfig:
    """One epsilon sweep.

    delta_rule is ("proportional", c) for delta = c eps or ("fixed", delta).
    dt_rule is ("cfl", factor) or ("fixed", dt).  ``mode`` selects the
    verdicts: "rate" (rate against 6(2/3 - 1/p)) or "onsager" (bounded
    dissipation, Onsager gate at exponent ``onsager_a``, then the a - 1/3 rate).
    """

    initial: InitialVorticitySpec
    p: object
    eps: list
    filter: str = "gaussian"
    filter_params: dict = field(default_factory=dict)
    delta_rule: tuple = ("proportional", 0.5)
    dt_rule: tuple = ("cfl", 0.2)
    T: float = 0.5
    cadence: float = 0.05
    grid_h_factor: float = 0.125
    defect_samples: int = 1
    fit_window: int = 4
    mode: str = "rate"
    onsager_a: object = Fraction(1, 2)
    onsager_h: Optional[float] = None
    onsager_margin: float = 0.5
    rate_tolerance: float = 0.2
    onsager_rate_tolerance: float = 0.1
    r2_min: float = 0.95
    spread_max: float = 2.0
    max_particles: int = 5000

    def __post_init__(self):
        eps = [float(e) for e in self.eps]
        if len(eps) < 4:
            raise ValueError("a sweep needs at least 4 eps values")
        if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
            raise ValueError("eps list must be positive and strictly decreasing")
        self.eps = eps
        if not (isinstance(self.p, float) and math.isinf(self.p)):
            self.p = as_fraction(self.p)
            if self.p <= 1:
                raise ValueError("p must exceed 1")
        if self.mode not in ("rate", "onsager"):
            raise ValueError("mode must be rate or onsager")
        if self.delta_rule[0] not in ("proportional", "fixed") or not self.delta_rule[1] > 0:
            raise ValueError("bad delta rule")
        if self.dt_rule[0] not in ("cfl", "fixed") or not self.dt_rule[1] > 0:
            raise ValueError("bad dt rule")
        if not 3 <= self.fit_window <= len(eps):
            raise ValueError("fit window must cover 3 to len(eps) values")
        if not self.initial.in_Lp(float(self.p)):
            raise ValueError("initial data is not in the declared L^p class")
        self.onsager_a = as_fraction(self.onsager_a)

    def delta(self, eps):
        kind, c = self.delta_rule
        return c * eps if kind == "proportional" else c

    def to_dict(self):
        d = asdict(self)
        d["p"] = str(self.p)
        d["onsager_a"] = str(self.onsager_a)
        d["delta_rule"] = list(self.delta_rule)
        d["dt_rule"] = list(self.dt_rule)
        return d

    def config_hash(self):
        return _hash(self.to_dict())[:16]


@dataclass
class SweepReport:
    config: dict
    config_hash: str
    runs: list
    fits: dict
    targets: dict
    verdicts: dict
    table_checksums: dict
    partial: bool = False

    @property
    def passed(self):
        return (not self.partial) and all(v.get("pass", True) for v in self.verdicts.values())

    def to_dict(self):
        return {"config": self.config, "config_hash": self.config_hash, "partial": self.partial,
                "passed": self.passed, "runs": self.runs, "fits": self.fits, "targets": self.targets,
                "verdicts": self.verdicts, "table_checksums": self.table_checksums}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, default=str)

    def series_csv(self, index):
        return self.runs[index].get("series_csv", "")


def _run_one(cfg: SweepConfig, eps):
    """Simulate one eps and collect every per-eps diagnostic."""
    spec = builtin_filter(cfg.filter, cfg.filter_params or None)
    delta = cfg.delta(eps)
    ens = discretize(cfg.initial, delta, eps, spec)
    if ens.n > cfg.max_particles:
        raise ValueError(f"eps={eps}: {ens.n} particles exceed the cap {cfg.max_particles}")
    dt = cfg.dt_rule[1] if cfg.dt_rule[0] == "fixed" else None
    sim = SimulationConfig(ensemble=ens, eps=eps, filter=spec, delta=delta, dt=dt, T=cfg.T,
                           cadence=cfg.cadence, record_trajectory=cfg.defect_samples > 1)
    if dt is None:
        from .particles import cfl_timestep

        sim.dt = cfl_timestep(ens, delta, cfg.dt_rule[1])
    res = simulate(sim)
    series = res.series
    out = {
        "eps": eps,
        "delta": delta,
        "N": ens.n,
        "dt": res.dt,
        "steps": res.steps,
        "sup_dissipation": series.sup_dissipation(),
        "hamiltonian_drift": series.hamiltonian_drift(),
        "table_sha256": series.meta["table_sha256"],
        "series_csv": series.to_csv(),
    }
    # energy defect on the default box at evenly spaced sample times
    states = [res.final]
    if cfg.defect_samples > 1:
        idx = np.linspace(0, len(res.frames) - 1, cfg.defect_samples).round().astype(int)
        states = [ens.with_positions(res.frames[i][1], res.frames[i][0]) for i in idx]
    support = cfg.initial.support_radius()
    Rs = []
    for st in states:
        grid = F.default_grid(st, eps_max=cfg.eps[0], support_radius=support, center=cfg.initial.center,
                              h=cfg.grid_h_factor * eps)
        Rs.append(F.lp_norm(F.energy_defect(st, grid), 1))
    out["defect_L1"] = Rs
    out["defect_times"] = [float(st.t) for st in states]
    table = K.kernel_table(spec, eps)
    p = cfg.p
    if not (isinstance(p, float) and math.isinf(p)):
        pp = p / (p - 1)
        out["norm_w1_gradHG_Lpprime"] = K.weighted_grad_norm(table, 1.0, float(pp))
    out["norm_wa_gradHG_L3"] = K.weighted_grad_norm(table, float(cfg.onsager_a), 3.0)
    if cfg.mode == "onsager":
        h = cfg.onsager_h or cfg.eps[-1] / 4.0
        c = cfg.initial.center
        half = support + cfg.onsager_margin
        og = F.Grid.from_box((c[0] - half, c[0] + half, c[1] - half, c[1] + half), h)
        out["onsager_modulus"] = max(F.onsager_modulus(st, og, a=float(cfg.onsager_a)) for st in (ens, res.final))
    return out


def _run_safe(cfg, eps):
    try:
        return _run_one(cfg, eps)
    except (SimulationError, ValueError, FloatingPointError) as exc:
        return {"eps": eps, "failed": True, "error": f"{type(exc).__name__}: {exc}"}


def run_sweep(config: SweepConfig, jobs=1):
    """One simulation per eps, then rate fits and verdicts on the fit window."""
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_safe, [config] * len(config.eps), config.eps))
    else:
        runs = [_run_safe(config, e) for e in config.eps]
    runs.sort(key=lambda r: -r["eps"])
    ok = [r for r in runs if not r.get("failed")]
    partial = len(ok) < len(runs)
    target = dissipation_exponent(config.p)
    targets = {"dissipation": str(target), "dissipation_float": float(target)}
    fits, verdicts = {}, {}
    w = config.fit_window

    def fit(key, pick=lambda r, k: r[k]):
        pairs = [(r["eps"], pick(r, key)) for r in ok]
        if len(pairs) < 3:
            return None
        f = fit_decay_rate(pairs, window=min(w, len(pairs)))
        fits[key] = f.to_dict()
        return f

    fD = fit("sup_dissipation")
    fR = fit("defect_L1", lambda r, k: max(r[k]))
    if config.mode == "rate":
        thr = float(target) - config.rate_tolerance
        if fD is not None:
            verdicts["dissipation_rate"] = {
                "pass": bool(fD.verdict == "exact zero" or (fD.exponent >= thr and fD.r2 >= config.r2_min)),
                "threshold": thr, "r2_min": config.r2_min, "exponent": fD.exponent, "r2": fD.r2}
        if fR is not None:
            verdicts["defect_rate"] = {"pass": bool(fR.verdict == "exact zero" or fR.exponent >= thr),
                                       "threshold": thr, "exponent": fR.exponent}
    else:
        sup = [r["sup_dissipation"] for r in ok]
        spread = max(sup) / min(sup) if min(sup) > 0 else math.inf
        verdicts["dissipation_bounded"] = {"pass": bool(spread <= config.spread_max), "spread": spread,
                                           "limit": config.spread_max}
        mods = [r["onsager_modulus"] for r in ok]
        mspread = max(mods) / min(mods)
        gate = mspread <= config.spread_max
        targets["onsager"] = str(onsager_exponent(config.onsager_a))
        verdicts["onsager_gate"] = {"pass": True, "open": bool(gate), "spread": mspread,
                                    "a": str(config.onsager_a)}
        thr = float(onsager_exponent(config.onsager_a)) - config.onsager_rate_tolerance
        if gate and fD is not None:
            verdicts["onsager_rate"] = {"pass": bool(fD.verdict == "exact zero" or fD.exponent >= thr),
                                        "threshold": thr, "exponent": fD.exponent}
        else:
            verdicts["onsager_rate"] = {"pass": True, "skipped": "gate closed", "threshold": thr}
    if partial:
        verdicts["complete"] = {"pass": False, "failed_eps": [r["eps"] for r in runs if r.get("failed")]}
    checks = {str(r["eps"]): r["table_sha256"] for r in ok}
    return SweepReport(config.to_dict(), config.config_hash(), runs, fits, targets, verdicts, checks, partial)


# --------------------------------------------------------------------------
# Euler limit


@dataclass
class LimitStudyConfig:
    initial: InitialVorticitySpec
    eps: list
    eps_ref: float
    delta: float
    T: float = 1.0
    filter: str = "gaussian"
    filter_params: dict = field(default_factory=dict)
    dt: Optional[float] = None
    R: float = 2.0
    r: float = 2.0
    grid_h: float = 0.02
    allowance: float = 0.10

    def __post_init__(self):
        self.eps = [float(e) for e in self.eps]
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        if self.eps_ref > min(self.eps):
            raise ValueError("the reference eps must be the smallest")
        if self.delta > self.eps_ref:
            raise ValueError("the reference run needs delta <= eps_ref")

    def to_dict(self):
        return asdict(self)


def _limit_run(cfg, eps, grid, disk, dt):
    spec = builtin_filter(cfg.filter, cfg.filter_params or None)
    ens = discretize(cfg.initial, cfg.delta, eps, spec)
    res = simulate(SimulationConfig(ensemble=ens, eps=eps, filter=spec, delta=cfg.delta, dt=dt, T=cfg.T,
                                    cadence=cfg.T / 2, record_trajectory=True))
    fields_t = []
    for t, pos in res.frames:
        st = ens.with_positions(pos, t)
        fields_t.append(F.eval_velocity_grid(st, grid, disk).values[disk])
    lp0 = {str(k): v for k, v in res.series.lp_norms.items()}
    return fields_t, [t for t, _ in res.frames], res, lp0


def euler_limit_study(cfg: LimitStudyConfig):
    """||u^eps - u^ref||_{L^r(B_R)} at t = 0, T/2, T against the smallest-eps run."""
    c = cfg.initial.center
    grid = F.Grid.from_box((c[0] - cfg.R, c[0] + cfg.R, c[1] - cfg.R, c[1] + cfg.R), cfg.grid_h)
    X, Y = grid.nodes()
    disk = (X - c[0]) ** 2 + (Y - c[1]) ** 2 <= cfg.R**2
    spec = builtin_filter(cfg.filter, cfg.filter_params or None)
    dt = cfg.dt
    if dt is None:
        from .particles import cfl_timestep

        dt = cfl_timestep(discretize(cfg.initial, cfg.delta, cfg.eps_ref, spec), cfg.delta)
    try:
        ref, times, ref_res, lp_ref = _limit_run(cfg, cfg.eps_ref, grid, disk, dt)
    except SimulationError as exc:
        raise RuntimeError(f"reference run failed: {exc}") from exc
    h2 = grid.h**2
    rows = []
    for eps in cfg.eps:
        u, _, res, lp = _limit_run(cfg, eps, grid, disk, dt)
        diffs = []
        for a, b in zip(u, ref):
            d = np.hypot(*(a - b).T)
            diffs.append(float(np.sum(d**cfg.r) * h2) ** (1.0 / cfg.r))
        rows.append({"eps": eps, "diff": diffs, "lp_norms": lp})
    verdicts = {}
    for k, t in enumerate(times):
        ok, inv = monotone_verdict([row["diff"][k] for row in rows], cfg.allowance)
        verdicts[f"t={t:.6g}"] = {"pass": bool(ok), "inversions": inv}
    return {"config": cfg.to_dict(), "config_hash": _hash(cfg.to_dict())[:16], "times": times,
            "eps_ref": cfg.eps_ref, "rows": rows, "reference_lp_norms": lp_ref,
            "verdicts": verdicts, "passed": all(v["pass"] for v in verdicts.values())}


# --------------------------------------------------------------------------
# kernel property suite


def verify_appendix(filter_name="gaussian", eps_list=(0.05, 0.1, 0.2, 0.4), params=None, spec=None,
                    n_radii=20, seed=0):
    """Kernel property suite for one filter over an eps list, as a JSON-ready dict.

    Checks: zero net mass |2 pi I(rho_max)| <= 1e-8; uniform decay constant
    (spread <= 5% across eps); (H_G)' against a five-point difference of H_G
    (<= 1e-5 relative); G' = m / (2 pi r) (<= 1e-8); H_G = h * G - G against a
    direct 2D quadrature at ``n_radii`` radii (<= 1e-6 relative); C0 limits;
    weighted norm scalings ||w_1 grad H_G||_{L^{7/3}} / eps^{6/7} and
    ||w_{1/2} grad H_G||_{L^3} / eps^{1/6} constant within 2%.
    """
    spec = spec or builtin_filter(filter_name, params)
    rng = np.random.default_rng(seed)
    res = {"filter": spec.name, "params": dict(spec.params), "eps": list(map(float, eps_list)), "checks": {}}
    checks = res["checks"]
    tabs = [K.kernel_table(spec, e) for e in eps_list]
    res["table_sha256"] = {str(e): t.checksum() for e, t in zip(eps_list, tabs)}

    nm = abs(K.net_mass(tabs[0]))
    checks["net_mass"] = {"value": nm, "threshold": 1e-8, "pass": bool(nm <= 1e-8)}

    sups = [K.decay_constant(t) for t in tabs]
    spread = max(sups) / min(sups) - 1 if min(sups) > 0 else math.inf
    checks["decay_uniform"] = {"values": sups, "spread": spread, "threshold": 0.05,
                               "pass": bool(spread <= 0.05 and all(np.isfinite(sups)))}

    def fd5(f, r, st):
        return (-f(r + 2 * st) + 8 * f(r + st) - 8 * f(r - st) + f(r - 2 * st)) / (12 * st)

    worst_fd = worst_g = worst_def = 0.0
    for e, t in zip(eps_list, tabs):
        r = e * np.geomspace(0.1, 10.0, 400)
        st = 1e-4 * r
        an = K.grad_HG(t, r)
        worst_fd = max(worst_fd, float(np.max(np.abs(fd5(lambda x: K.HG_value(t, x), r, st) / an - 1))))
        ref = t.enclosed_mass(r / e) / (2 * math.pi * r)
        gp = fd5(lambda x: K.mollified_green(t, x), r, st)
        worst_g = max(worst_g, float(np.max(np.abs(gp / ref - 1))))
        for x in e * rng.uniform(0.0, 2.0, n_radii):
            worst_def = max(worst_def, abs(K.hg_by_convolution(t, x) / K.HG_value(t, x) - 1))
    checks["derivative_consistency"] = {"value": worst_fd, "threshold": 1e-5, "pass": bool(worst_fd <= 1e-5)}
    checks["green_derivative"] = {"value": worst_g, "threshold": 1e-8, "pass": bool(worst_g <= 1e-8)}
    checks["definition_identity"] = {"value": worst_def, "threshold": 1e-6, "radii": n_radii,
                                     "pass": bool(worst_def <= 1e-6)}

    # continuity at the origin: H_G^eps(0) finite and (H_G^eps)'(r) -> 0 as r -> 0
    c0 = []
    for e, t in zip(eps_list, tabs):
        v0 = float(K.HG_value(t, 0.0))
        d0 = abs(float(K.grad_HG(t, 1e-6 * e))) * e
        c0.append({"eps": e, "HG0": v0, "dHG_small": d0})
    checks["c0_limits"] = {"values": c0, "pass": bool(all(np.isfinite(c["HG0"]) and c["dHG_small"] < 1e-4
                                                          for c in c0))}

    for key, a, q, s in (("w1_L7_3", 1.0, 7.0 / 3.0, Fraction(6, 7)), ("whalf_L3", 0.5, 3.0, Fraction(1, 6))):
        vals = [K.weighted_grad_norm(t, a, q) / e ** float(s) for e, t in zip(eps_list, tabs)]
        spr = max(vals) / min(vals) - 1
        checks[f"norm_{key}"] = {"ratios": vals, "spread": spr, "scaling": str(s), "threshold": 0.02,
                                 "pass": bool(spr <= 0.02)}

    res["passed"] = all(c["pass"] for c in checks.values())
    return res


def corrupted_decay_check(spec, eps_list=(0.05, 0.1, 0.2, 0.4), rho_cut=2.0):
    """Decay-uniformity check on a table whose tail beyond rho_cut is zeroed."""
    bad = K.corrupt_tail(spec, rho_cut)
    return verify_appendix(spec=bad, eps_list=eps_list)["checks"]["decay_uniform"]
