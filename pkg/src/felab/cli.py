"""Command-line front end.

    felab kernel-table --filter gaussian --eps 0.1 --out table.bin [--csv t.csv] [--verify]
    felab simulate CONFIG [--out DIR] [--seed N] [--strict]
    felab sweep CONFIG [--out DIR] [--jobs N] [--seed N] [--strict]
    felab limit-study CONFIG [--out DIR] [--seed N] [--strict]
    felab verify [--filter NAME ...] [--eps E ...] [--out FILE] [--strict]

Exit codes: 0 success, 1 runtime failure, 2 usage or config error,
3 failed acceptance check under --strict.  FEL_THREADS caps the number of
compute threads.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        hint = ""
        if "--filter" in message:
            hint = " (choose one of: gaussian, algebraic_blob, euler_alpha)"
        sys.stderr.write(f"{self.prog}: error: {message}{hint}\n")
        raise SystemExit(EXIT_USAGE)


def _apply_threads():
    n = os.environ.get("FEL_THREADS")
    if not n:
        return
    try:
        k = int(n)
    except ValueError:
        raise ConfigError(f"FEL_THREADS must be an integer, got {n!r}")
    if k < 1:
        raise ConfigError("FEL_THREADS must be >= 1")
    import numba

    numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# --------------------------------------------------------------------------
# subcommands


def cmd_kernel_table(args):
    from . import kernels as K
    from .experiments import verify_appendix
    from .filters import builtin_filter

    params = {"alpha": args.alpha} if args.alpha is not None else None
    try:
        spec = builtin_filter(args.filter, params)
    except ValueError as exc:
        raise ConfigError(str(exc))
    if args.eps is not None and not args.eps > 0:
        raise ConfigError("--eps must be positive")
    status = EXIT_OK
    if args.out or args.csv or not args.verify:
        eps = args.eps if args.eps is not None else 0.1
        table = K.kernel_table(spec, eps)
        if args.out:
            K.save_table(table, args.out)
            print(f"{table.checksum()}  {args.out}")
        if args.csv:
            K.table_to_csv(table, args.csv)
            print(f"{table.checksum()}  {args.csv}")
        if not args.out and not args.csv:
            print(f"{table.checksum()}  (filter={spec.name}, eps={eps:g}, not written)")
    if args.verify:
        eps_list = [args.eps] if args.eps is not None and args.eps_list is None else (args.eps_list or [0.05, 0.1, 0.2, 0.4])
        if len(eps_list) < 2:
            eps_list = [0.05, 0.1, 0.2, 0.4]
        rep = verify_appendix(spec=spec, eps_list=eps_list)
        print(json.dumps(rep, sort_keys=True, indent=1, default=str))
        if not rep["passed"] and args.strict:
            status = EXIT_CHECK
    return status


def _simulate_checks(cfg, res):
    import numpy as np

    from .diagnostics import check_energy_balance

    checks = cfg.section("checks")
    series = res.series
    out = {}
    if "hamiltonian_drift" in checks:
        v = series.hamiltonian_drift()
        out["hamiltonian_drift"] = {"value": v, "limit": checks["hamiltonian_drift"],
                                    "pass": v <= checks["hamiltonian_drift"]}
    if "energy_balance" in checks:
        v = check_energy_balance(series)
        out["energy_balance"] = {"value": v, "limit": checks["energy_balance"], "pass": v <= checks["energy_balance"]}
    if "dissipation_abs" in checks:
        v = series.sup_dissipation()
        out["dissipation_abs"] = {"value": v, "limit": checks["dissipation_abs"], "pass": v <= checks["dissipation_abs"]}
    if "dipole_speed_rel" in checks:
        ens = res.final
        if ens.n != 2:
            raise ConfigError("dipole_speed_rel needs exactly two point vortices")
        from .kernels import kernel_table

        g = ens.circulations
        d = float(np.hypot(*(ens.positions[0] - ens.positions[1])))
        tab = kernel_table(ens.filter, ens.eps)
        expected = abs(g[0]) * float(tab.enclosed_mass(d / ens.eps)) / (2 * math.pi * d)
        tt = series.times
        pos0 = res.frames[0][1] if res.frames else None
        if pos0 is None:
            raise ConfigError("dipole_speed_rel needs record_trajectory = true")
        m0 = pos0.mean(axis=0)
        m1 = ens.positions.mean(axis=0)
        speed = float(np.hypot(*(m1 - m0))) / (tt[-1] - tt[0])
        v = abs(speed / expected - 1)
        out["dipole_speed_rel"] = {"value": v, "expected_speed": expected, "measured_speed": speed,
                                   "limit": checks["dipole_speed_rel"], "pass": v <= checks["dipole_speed_rel"]}
    return out


def cmd_simulate(args):
    from .diagnostics import check_energy_balance
    from .particles import simulate, trajectory_to_csv

    cfg = load_config(args.config, args.seed)
    sim = cfg.simulation_config()
    outdir = Path(args.out or cfg.data.get("output_dir", "out"))
    res = simulate(sim)
    h = cfg.config_hash()
    res.series.meta["config_hash"] = h
    series_path = _write(outdir / "series.csv", res.series.to_csv())
    if res.frames:
        trajectory_to_csv(res.frames, res.final.circulations, outdir / "trajectory.csv",
                          header=json.dumps({"config_hash": h}))
    checks = _simulate_checks(cfg, res)
    summary = {"config_hash": h, "config": cfg.data, "N": res.final.n, "dt": res.dt, "steps": res.steps,
               "hamiltonian_drift": res.series.hamiltonian_drift(),
               "sup_dissipation": res.series.sup_dissipation(), "checks": checks}
    if len(res.series.snapshots) >= 3:
        summary["energy_balance"] = check_energy_balance(res.series)
    _write(outdir / "summary.json", json.dumps(summary, sort_keys=True, indent=1, default=str))
    print(f"config {h}  N={res.final.n}  steps={res.steps}  dt={res.dt:.3g}")
    print(f"hamiltonian drift {summary['hamiltonian_drift']:.3e}   sup|D| {summary['sup_dissipation']:.3e}")
    for k, v in checks.items():
        print(f"check {k}: {v['value']:.3e} (limit {v['limit']:g}) {'PASS' if v['pass'] else 'FAIL'}")
    print(f"wrote {series_path}")
    if args.strict and not all(v["pass"] for v in checks.values()):
        return EXIT_CHECK
    return EXIT_OK


def cmd_sweep(args):
    from .experiments import run_sweep

    cfg = load_config(args.config, args.seed)
    sc = cfg.sweep_config()
    outdir = Path(args.out or cfg.data.get("output_dir", "out"))
    rep = run_sweep(sc, jobs=args.jobs)
    for r in rep.runs:
        if "series_csv" in r:
            _write(outdir / "series" / f"eps_{r['eps']:.6g}.csv", r["series_csv"])
    d = rep.to_dict()
    for r in d["runs"]:
        r.pop("series_csv", None)
    d["run_config_hash"] = cfg.config_hash()
    _write(outdir / "report.json", json.dumps(d, sort_keys=True, indent=1, default=str))
    for r in rep.runs:
        if r.get("failed"):
            print(f"eps={r['eps']:<8.4g} FAILED {r['error']}")
        else:
            extra = f"  onsager {r['onsager_modulus']:.4g}" if "onsager_modulus" in r else ""
            print(f"eps={r['eps']:<8.4g} N={r['N']:<5d} sup|D|={r['sup_dissipation']:.4e}  "
                  f"|R|_1={max(r['defect_L1']):.4e}{extra}")
    for k, v in rep.verdicts.items():
        print(f"verdict {k}: {'PASS' if v['pass'] else 'FAIL'} {json.dumps({a: b for a, b in v.items() if a != 'pass'}, default=str)}")
    print(f"wrote {outdir / 'report.json'}")
    if rep.partial:
        return EXIT_RUNTIME
    if args.strict and not rep.passed:
        return EXIT_CHECK
    return EXIT_OK


def cmd_limit_study(args):
    from .experiments import euler_limit_study

    cfg = load_config(args.config, args.seed)
    lc = cfg.limit_config()
    outdir = Path(args.out or cfg.data.get("output_dir", "out"))
    rep = euler_limit_study(lc)
    rep["run_config_hash"] = cfg.config_hash()
    _write(outdir / "limit_report.json", json.dumps(rep, sort_keys=True, indent=1, default=str))
    for row in rep["rows"]:
        print(f"eps={row['eps']:<8.4g} " + "  ".join(f"{d:.4e}" for d in row["diff"]))
    for k, v in rep["verdicts"].items():
        print(f"monotone {k}: {'PASS' if v['pass'] else 'FAIL'}")
    if args.strict and not rep["passed"]:
        return EXIT_CHECK
    return EXIT_OK


def cmd_verify(args):
    from .experiments import corrupted_decay_check, verify_appendix
    from .filters import builtin_filter

    eps_list = args.eps or [0.05, 0.1, 0.2, 0.4]
    if len(eps_list) < 2:
        raise ConfigError("verify needs at least two eps values")
    out = {}
    for name in args.filter or ["gaussian", "algebraic_blob"]:
        try:
            spec = builtin_filter(name)
        except ValueError as exc:
            raise ConfigError(str(exc))
        out[name] = verify_appendix(spec=spec, eps_list=eps_list)
        print(f"{name}: {'PASS' if out[name]['passed'] else 'FAIL'}")
    bad = corrupted_decay_check(builtin_filter("gaussian"), eps_list)
    out["fault_injection"] = {"decay_uniform_on_corrupted_table": bad, "pass": not bad["pass"]}
    print(f"fault injection detected: {'PASS' if not bad['pass'] else 'FAIL'}")
    text = json.dumps(out, sort_keys=True, indent=1, default=str)
    if args.out:
        _write(args.out, text)
    ok = all(v.get("passed", v.get("pass")) for v in out.values())
    return EXIT_CHECK if (args.strict and not ok) else EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="felab", description="Filtered-Euler particle laboratory")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    k = sub.add_parser("kernel-table", help="build, save and optionally verify a kernel table")
    k.add_argument("--filter", required=True, help="gaussian | algebraic_blob | euler_alpha")
    k.add_argument("--alpha", type=float, default=None, help="filter parameter alpha")
    k.add_argument("--eps", type=float, default=None)
    k.add_argument("--eps-list", type=float, nargs="+", default=None, help="eps values for --verify")
    k.add_argument("--out", default=None, help="binary table path")
    k.add_argument("--csv", default=None, help="CSV dump path")
    k.add_argument("--verify", action="store_true", help="run the kernel property suite")
    k.add_argument("--strict", action="store_true")
    k.set_defaults(func=cmd_kernel_table)

    for name, fn, helptext in (("simulate", cmd_simulate, "run one simulation from a config"),
                               ("sweep", cmd_sweep, "run an eps sweep from a config"),
                               ("limit-study", cmd_limit_study, "run the Euler-limit study")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="seed for multi_blob data")
        s.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
        if name == "sweep":
            s.add_argument("--jobs", type=int, default=1, help="worker processes")
        s.set_defaults(func=fn)

    v = sub.add_parser("verify", help="kernel property suite as JSON")
    v.add_argument("--filter", action="append", default=None)
    v.add_argument("--eps", type=float, nargs="+", default=None)
    v.add_argument("--out", default=None)
    v.add_argument("--strict", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads()
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_USAGE
    except Exception as exc:  # runtime failures are reported, not raised
        sys.stderr.write(f"runtime error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
