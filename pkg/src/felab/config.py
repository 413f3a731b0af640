"""Versioned TOML run configuration with strict key checking.

Layout (schema_version = 1)::

    schema_version = 1
    seed = 7                  # optional, overrides initial.seed
    output_dir = "out"

    [filter]    name, alpha
    [initial]   kind, center, radius, amplitude, sigma, aspect, beta, count,
                seed, spread, blob_profile, signed
    [points]    positions, circulations     (explicit point vortices)
    [solver]    eps, delta, dt, T, cadence, record_trajectory
    [checks]    hamiltonian_drift, energy_balance, dissipation_abs,
                dipole_speed_rel            (enforced by --strict)
    [sweep]     p, eps, mode, delta_rule, delta, dt_rule, dt, T, cadence,
                grid_h_factor, defect_samples, fit_window, onsager_a,
                onsager_h, onsager_margin, rate_tolerance,
                onsager_rate_tolerance, r2_min, spread_max, max_particles
    [limit]     eps, eps_ref, delta, T, dt, R, r, grid_h, allowance

Unknown sections or keys are rejected before any computation.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import tomli

SCHEMA_VERSION = 1

_NUM = (int, float)
SCHEMA = {
    "filter": {"name": str, "alpha": _NUM},
    "initial": {"kind": str, "center": list, "radius": _NUM, "amplitude": _NUM, "sigma": _NUM,
                "aspect": _NUM, "beta": _NUM, "count": int, "seed": int, "spread": _NUM,
                "blob_profile": str, "signed": bool},
    "points": {"positions": list, "circulations": list},
    "solver": {"eps": _NUM, "delta": _NUM, "dt": _NUM, "T": _NUM, "cadence": _NUM,
               "record_trajectory": bool},
    "checks": {"hamiltonian_drift": _NUM, "energy_balance": _NUM, "dissipation_abs": _NUM,
               "dipole_speed_rel": _NUM},
    "sweep": {"p": (str, int, float), "eps": list, "mode": str, "delta_rule": str, "delta": _NUM,
              "dt_rule": str, "dt": _NUM, "T": _NUM, "cadence": _NUM, "grid_h_factor": _NUM,
              "defect_samples": int, "fit_window": int, "onsager_a": (str, int, float),
              "onsager_h": _NUM, "onsager_margin": _NUM, "rate_tolerance": _NUM,
              "onsager_rate_tolerance": _NUM, "r2_min": _NUM, "spread_max": _NUM,
              "max_particles": int},
    "limit": {"eps": list, "eps_ref": _NUM, "delta": _NUM, "T": _NUM, "dt": _NUM, "R": _NUM, "r": _NUM,
              "grid_h": _NUM, "allowance": _NUM},
}
TOP = {"schema_version": int, "seed": int, "output_dir": str}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


@dataclass
class RunConfig:
    data: dict
    source: str = "<memory>"
    overrides: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.data.get("seed")

    def section(self, name):
        return dict(self.data.get(name, {}))

    def config_hash(self):
        return hashlib.sha256(json.dumps(self.data, sort_keys=True).encode()).hexdigest()[:16]

    # builders ---------------------------------------------------------

    def filter_spec(self):
        from .filters import builtin_filter

        f = self.section("filter")
        name = f.pop("name", "gaussian")
        try:
            return builtin_filter(name, f or None)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def initial_spec(self):
        from .particles import InitialVorticitySpec

        ini = self.section("initial")
        if not ini:
            return None
        if "center" in ini:
            ini["center"] = tuple(float(c) for c in ini["center"])
        if self.seed is not None:
            ini["seed"] = self.seed
        try:
            return InitialVorticitySpec(**ini)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[initial]: {exc}") from exc

    def simulation_config(self):
        from .particles import SimulationConfig, point_vortices

        s = self.section("solver")
        if "eps" not in s:
            raise ConfigError("[solver] needs eps")
        spec = self.filter_spec()
        pts = self.section("points")
        ens = None
        if pts:
            try:
                ens = point_vortices(pts["positions"], pts["circulations"], float(s["eps"]), spec)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"[points]: {exc}") from exc
        initial = self.initial_spec()
        if ens is None and initial is None:
            raise ConfigError("need [initial] or [points]")
        if ens is None and "delta" not in s:
            raise ConfigError("[solver] needs delta for [initial] data")
        return SimulationConfig(initial=initial, eps=float(s["eps"]), filter=spec, delta=s.get("delta"),
                                dt=s.get("dt"), T=float(s.get("T", 1.0)), cadence=s.get("cadence"),
                                record_trajectory=bool(s.get("record_trajectory", False)), ensemble=ens)

    def sweep_config(self):
        from .experiments import SweepConfig

        sw = self.section("sweep")
        initial = self.initial_spec()
        if initial is None:
            raise ConfigError("a sweep needs [initial]")
        f = self.section("filter")
        name = f.pop("name", "gaussian")
        kw = {}
        for k in ("mode", "T", "cadence", "grid_h_factor", "defect_samples", "fit_window", "onsager_a",
                  "onsager_h", "onsager_margin", "rate_tolerance", "onsager_rate_tolerance", "r2_min",
                  "spread_max", "max_particles"):
            if k in sw:
                kw[k] = sw[k]
        rule = sw.get("delta_rule", "proportional")
        kw["delta_rule"] = (rule, float(sw.get("delta", 0.5)))
        dtr = sw.get("dt_rule", "cfl")
        kw["dt_rule"] = (dtr, float(sw.get("dt", 0.2)))
        if "p" not in sw or "eps" not in sw:
            raise ConfigError("[sweep] needs p and eps")
        try:
            return SweepConfig(initial=initial, p=sw["p"], eps=sw["eps"], filter=name, filter_params=f, **kw)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"[sweep]: {exc}") from exc

    def limit_config(self):
        from .experiments import LimitStudyConfig

        lim = self.section("limit")
        initial = self.initial_spec()
        if initial is None:
            raise ConfigError("a limit study needs [initial]")
        f = self.section("filter")
        name = f.pop("name", "gaussian")
        for k in ("eps", "eps_ref", "delta"):
            if k not in lim:
                raise ConfigError(f"[limit] needs {k}")
        try:
            return LimitStudyConfig(initial=initial, filter=name, filter_params=f, **lim)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[limit]: {exc}") from exc


def _check_types(section, table, schema):
    for key, val in table.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{section}]; allowed: {', '.join(sorted(schema))}")
        want = schema[key]
        if want is _NUM and isinstance(val, bool):
            raise ConfigError(f"[{section}] {key} must be a number")
        if not isinstance(val, want):
            raise ConfigError(f"[{section}] {key} has the wrong type ({type(val).__name__})")


def parse_config(data: dict, source="<memory>", seed=None):
    """Validate a config tree and return a RunConfig."""
    data = json.loads(json.dumps(data))  # deep copy, plain types only
    if "schema_version" not in data:
        raise ConfigError("missing schema_version (expected 1)")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {data['schema_version']} (expected {SCHEMA_VERSION})")
    for key, val in data.items():
        if key in TOP:
            _check_types("top level", {key: val}, TOP)
        elif key in SCHEMA:
            if not isinstance(val, dict):
                raise ConfigError(f"[{key}] must be a table")
            _check_types(key, val, SCHEMA[key])
        else:
            raise ConfigError(f"unknown section or key {key!r}; allowed: "
                              f"{', '.join(sorted(list(TOP) + list(SCHEMA)))}")
    if seed is not None:
        data["seed"] = int(seed)
    return RunConfig(data, source)


def load_config(path, seed=None):
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, str(path), seed)
