"""Acceptance criteria 1-9, one PASS/FAIL line each.

The slow criteria (3-9) run full simulations and sweeps; the whole module takes
roughly twenty minutes on one core.
"""
import math
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from felab import diagnostics as D
from felab import experiments as X
from felab import fields as F
from felab import kernels as K
from felab import particles as P
from felab.config import load_config
from felab.filters import builtin_filter

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EPS_SET = (0.05, 0.1, 0.2, 0.4)


def report(n, title, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def _spread(vals):
    vals = np.asarray(vals, dtype=float)
    return float(vals.max() / vals.min() - 1.0)


# ---- 1, 2: kernel tables ------------------------------------------------------------


def test_criterion_1_kernel_suite():
    worst = {}
    ok = True
    for name in ("gaussian", "algebraic_blob"):
        rep = X.verify_appendix(name, eps_list=EPS_SET, n_radii=20)
        c = rep["checks"]
        ok &= c["net_mass"]["value"] <= 1e-8
        ok &= c["decay_uniform"]["spread"] <= 0.05
        ok &= c["derivative_consistency"]["value"] <= 1e-5
        ok &= c["definition_identity"]["value"] <= 1e-6 and c["definition_identity"]["radii"] == 20
        worst[name] = (c["net_mass"]["value"], c["decay_uniform"]["spread"], c["derivative_consistency"]["value"],
                       c["definition_identity"]["value"])
    detail = "; ".join(f"{k} mass {v[0]:.1e} decay spread {v[1]:.1e} fd {v[2]:.1e} identity {v[3]:.1e}"
                       for k, v in worst.items())
    report(1, "kernel table suite", bool(ok), detail)


def test_criterion_2_weighted_norm_scalings():
    spreads = {}
    for name in ("gaussian", "algebraic_blob"):
        spec = builtin_filter(name)
        r73, r3 = [], []
        for eps in EPS_SET:
            t = K.kernel_table(spec, eps)
            r73.append(K.weighted_grad_norm(t, 1.0, 7 / 3) / eps ** (6 / 7))
            r3.append(K.weighted_grad_norm(t, 0.5, 3.0) / eps ** (1 / 6))
        spreads[name] = (_spread(r73), _spread(r3))
    ok = all(a <= 0.02 and b <= 0.02 for a, b in spreads.values())
    detail = "; ".join(f"{k} L7/3 spread {a:.1e}, L3 spread {b:.1e}" for k, (a, b) in spreads.items())
    report(2, "weighted norm scalings", ok, detail)


# ---- 3, 4, 5: dynamics -------------------------------------------------------------


def test_criterion_3_two_vortex():
    cfg = load_config(CONFIGS / "two_vortex.toml")
    sim = cfg.simulation_config()
    assert sim.T == 10.0 and sim.dt == 1e-3
    res = P.simulate(sim)
    gam, eps = 1.0, sim.eps
    dmax = res.series.sup_dissipation()
    d0 = math.hypot(*(sim.ensemble.positions[0] - sim.ensemble.positions[1]))
    d1 = math.hypot(*(res.final.positions[0] - res.final.positions[1]))
    drift = abs(d1 - d0) / d0

    # RK4 order against the exact rigid rotation
    omega = float(K.kernel_table(builtin_filter("gaussian"), eps).enclosed_mass(d0 / eps)) / (math.pi * d0 * d0)
    errs = []
    for dt in (0.4, 0.2, 0.1):
        ens = P.point_vortices([[-0.5, 0.0], [0.5, 0.0]], [1.0, 1.0], eps)
        fin = P.simulate(P.SimulationConfig(ensemble=ens, eps=eps, dt=dt, T=4.0, cadence=4.0)).final
        exact = -0.5 * np.array([math.cos(omega * 4.0), math.sin(omega * 4.0)])
        errs.append(np.max(np.abs(fin.positions[0] - exact)))
    order = min(math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2]))
    ok = dmax <= 1e-12 * gam**3 / eps and drift <= 1e-8 and order >= 3.8
    report(3, "two-vortex exactness", ok,
           f"sup|D| {dmax:.1e} (limit {1e-12 / eps:.0e}), separation drift {drift:.1e}, RK4 order {order:.2f}")


THREE = dict(positions=[[0, 0], [0.4, 0.1], [-0.2, 0.5]], circulations=[1.0, -0.6, 0.8], eps=0.3)
PATCH = P.InitialVorticitySpec("gaussian_patch", radius=1.0, sigma=0.5, aspect=2.0)


@pytest.fixture(scope="module")
def dynamics_runs():
    """3-vortex and N ~ 2000 patch runs over T = 5 at two sampling cadences with a shared dt."""
    ens = P.point_vortices(THREE["positions"], THREE["circulations"], THREE["eps"])
    three = [P.simulate(P.SimulationConfig(ensemble=ens, eps=0.3, dt=2.5e-3, T=5.0, cadence=c))
             for c in (0.02, 0.01)]
    patch = [P.simulate(P.SimulationConfig(PATCH, eps=0.1, delta=0.04, dt=0.0125, T=5.0, cadence=c))
             for c in (0.05, 0.025)]
    return three, patch


def test_criterion_4_hamiltonian_conservation(dynamics_runs):
    three, patch = dynamics_runs
    h3 = max(r.series.hamiltonian_drift() for r in three)
    hp = max(r.series.hamiltonian_drift() for r in patch)
    n = patch[0].final.n
    ok = h3 <= 1e-6 and hp <= 1e-4 and 1500 <= n <= 2500
    report(4, "Hamiltonian conservation", ok, f"3-vortex drift {h3:.1e}, patch (N={n}) drift {hp:.1e}")


def test_criterion_5_energy_balance(dynamics_runs):
    three, patch = dynamics_runs
    b3 = [D.check_energy_balance(r.series) for r in three]
    bp = [D.check_energy_balance(r.series) for r in patch]
    o3 = math.log2(b3[0] / b3[1])
    op = math.log2(bp[0] / bp[1])
    ok = b3[1] <= 1e-3 and bp[1] <= 1e-2 and o3 >= 1.8 and op >= 1.8
    report(5, "energy balance", ok,
           f"3-vortex {b3[0]:.1e} -> {b3[1]:.1e} (order {o3:.2f}), patch {bp[0]:.1e} -> {bp[1]:.1e} "
           f"(order {op:.2f})")


# ---- 6, 7, 8: sweeps -------------------------------------------------------------------


@pytest.fixture(scope="module")
def rate_sweep():
    cfg = load_config(CONFIGS / "thm1_p175_sweep.toml").sweep_config()
    assert cfg.p == X.as_fraction("7/4") and cfg.eps[0] == 0.4 and cfg.eps[-1] == 0.05
    return X.run_sweep(cfg)


def test_criterion_6_dissipation_rate(rate_sweep):
    rep = rate_sweep
    f = rep.fits["sup_dissipation"]
    thr = float(X.dissipation_exponent("7/4")) - 0.2
    nmax = max(r["N"] for r in rep.runs if not r.get("failed"))
    ok = (not rep.partial) and f["exponent"] >= thr and f["r2"] >= 0.95 and nmax <= 5000
    report(6, "dissipation decay rate, p = 7/4", ok,
           f"exponent {f['exponent']:.3f} (>= {thr:.3f}), R^2 {f['r2']:.3f} (>= 0.95), max N {nmax}")


def test_criterion_7_onsager_gate():
    cfg = load_config(CONFIGS / "thm2_p32_sweep.toml").sweep_config()
    assert cfg.p == X.as_fraction("3/2") and cfg.onsager_a == X.as_fraction("1/2")
    rep = X.run_sweep(cfg)
    v = rep.verdicts
    b, g, r = v["dissipation_bounded"], v["onsager_gate"], v["onsager_rate"]
    rate = f"exponent {r['exponent']:.3f} (>= {r['threshold']:.3f})" if "exponent" in r else "rate skipped"
    ok = (not rep.partial) and b["pass"] and r["pass"]
    report(7, "bounded dissipation and Onsager gate, p = 3/2", ok,
           f"sup|D| max/min {b['spread']:.2f} (<= 2), modulus max/min {g['spread']:.2f} "
           f"(gate {'open' if g['open'] else 'closed'}), {rate}")


def test_criterion_8_energy_defect(rate_sweep):
    rep = rate_sweep
    f = rep.fits["defect_L1"]
    thr = float(X.dissipation_exponent("7/4")) - 0.2
    ok_rate = (not rep.partial) and f["exponent"] >= thr

    worst = 0.0
    triples = ((1, 2, 2), (2, 4, 4), (1, 1.5, 3), (2, math.inf, 2))
    for seed in range(10):
        spec = P.InitialVorticitySpec("multi_blob", count=3, seed=seed, blob_profile="gaussian_patch", radius=0.5,
                                      spread=0.8, signed=True)
        ens = P.discretize(spec, 0.1, 0.2)
        g = F.default_grid(ens, h=0.025)
        r = F.commutator_residual(ens, g)
        u = F.eval_velocity_grid(ens, g)
        for alpha, beta, gamma in triples:
            worst = max(worst, F.lp_norm(r, alpha) / F.residual_bound(ens, u, beta, gamma))
    ok = ok_rate and worst <= 1.05
    report(8, "energy defect decay and residual inequality", ok,
           f"||R||_L1 exponent {f['exponent']:.3f} (>= {thr:.3f}); worst residual/bound {worst:.3f} (<= 1.05)")


# ---- 9: Euler limit --------------------------------------------------------------------


def test_criterion_9_euler_limit():
    cfg = load_config(CONFIGS / "limit_study.toml").limit_config()
    out = X.euler_limit_study(cfg)
    rows = out["rows"]
    ok = out["passed"] and len(out["times"]) == 3
    detail = ", ".join(f"t={t:g}: " + "/".join(f"{row['diff'][k]:.3g}" for row in rows)
                       for k, t in enumerate(out["times"]))
    report(9, "Euler limit monotonicity", ok, detail)
