"""Energy functionals of a particle ensemble as pair sums.

    pseudo energy       H   = -1/2 sum_{i != j} G^eps(d_ij) Gamma_i Gamma_j
    interaction energy  E   = -1/2 sum_{i, j}   H_G^eps(d_ij) Gamma_i Gamma_j
    dissipation rate    D   = -1/2 sum_{i != j} (H_G^eps)'(d_ij) e_ij . (u_i - u_j) Gamma_i Gamma_j

Diagonal policy: the i = j terms are dropped from H (G^eps(0) times a constant)
and D (zero), and kept in E, where H_G^eps(0) is finite and the diagonal makes
the discrete sum consistent with the continuum double integral.  Both are
constants of the motion, so dE/dt = D is unaffected.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _summation as S

__all__ = [
    "DiagnosticsSeries",
    "Snapshot",
    "pseudo_energy",
    "interaction_energy",
    "dissipation_rate",
    "diagnostics_snapshot",
    "check_energy_balance",
    "brute_force_dissipation",
]


@dataclass(frozen=True)
class Snapshot:
    t: float
    hamiltonian: float
    energy: float
    dissipation: float
    circulation: float
    center: tuple
    umax: float


def _pair_sums(ens, u=None):
    from .particles import velocities

    ctx = ens.context
    if u is None:
        u = velocities(ens)
    gd, gp = ctx.tab("G1")
    hd, hp = ctx.tab("HG")
    idd, ip = ctx.tab("I")
    x = np.ascontiguousarray(ens.positions[:, 0])
    y = np.ascontiguousarray(ens.positions[:, 1])
    return S.pair_diagnostics(x, y, ens.circulations, np.ascontiguousarray(u[:, 0]),
                              np.ascontiguousarray(u[:, 1]), ctx.eps, gd, gp, hd, hp, idd, ip)


def pseudo_energy(ens):
    """Hamiltonian of the filtered point-vortex system (diagonal excluded)."""
    if ens.n < 2:
        return 0.0
    return float(_pair_sums(ens, np.zeros((ens.n, 2)))[0])


def interaction_energy(ens):
    """-1/2 sum_{i,j} H_G^eps(|x_i - x_j|) Gamma_i Gamma_j, diagonal included."""
    return float(_pair_sums(ens, np.zeros((ens.n, 2)))[1])


def dissipation_rate(ens, u=None):
    """Rate of change of the interaction energy along the particle flow."""
    if ens.n < 2:
        return 0.0
    return float(_pair_sums(ens, u)[2])


def diagnostics_snapshot(ens, u=None):
    from .particles import velocities

    if u is None:
        u = velocities(ens)
    ham, ener, diss = _pair_sums(ens, u)
    return Snapshot(float(ens.t), float(ham), float(ener), float(diss), ens.total_circulation(),
                    tuple(float(c) for c in ens.center_of_vorticity()),
                    float(np.max(np.hypot(u[:, 0], u[:, 1]))) if ens.n else 0.0)


def brute_force_dissipation(ens, kernel_I, kernel_m):
    """Dissipation rate with every kernel value supplied by callables.

    ``kernel_I(rho)`` and ``kernel_m(rho)`` are evaluated pair by pair, so an
    independent quadrature can be plugged in without any table.
    """
    x = ens.positions
    g = ens.circulations
    eps = ens.eps
    n = ens.n
    u = np.zeros((n, 2))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = x[i] - x[j]
            r = math.hypot(*d)
            f = kernel_m(r / eps) / (2 * math.pi * r * r)
            u[i] += np.array([-d[1], d[0]]) * f * g[j]
    tot = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = x[i] - x[j]
            r = math.hypot(*d)
            tot += kernel_I(r / eps) / r * (d / r) @ (u[i] - u[j]) * g[i] * g[j]
    return -0.5 * tot


@dataclass
class DiagnosticsSeries:
    """Time series of the energy functionals sharing one time axis."""

    meta: dict
    snapshots: list = field(default_factory=list)
    lp_norms: dict = field(default_factory=dict)
    attachments: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, ens, config=None):
        meta = {
            "filter": ens.filter.name,
            "filter_params": dict(ens.filter.params),
            "eps": ens.eps,
            "N": ens.n,
            "abs_circulation": float(np.sum(np.abs(ens.circulations))),
            "table_sha256": ens.context.core.checksum(),
        }
        lp = {}
        if ens.cell_area > 0:
            exps = getattr(config, "lp_exponents", (1.0, 2.0)) if config is not None else (1.0, 2.0)
            lp = {float(p): ens.lp_surrogate(p) for p in exps}
        return cls(meta, [], lp)

    def append(self, snap):
        self.snapshots.append(snap)

    def _col(self, name):
        return np.array([getattr(s, name) for s in self.snapshots])

    @property
    def times(self):
        return self._col("t")

    @property
    def hamiltonian(self):
        return self._col("hamiltonian")

    @property
    def energy(self):
        return self._col("energy")

    @property
    def dissipation(self):
        return self._col("dissipation")

    @property
    def circulation(self):
        return self._col("circulation")

    @property
    def center(self):
        return np.array([s.center for s in self.snapshots])

    def hamiltonian_drift(self):
        h = self.hamiltonian
        scale = abs(h[0]) if h[0] != 0 else 1.0
        return float(np.max(np.abs(h - h[0])) / scale)

    def sup_dissipation(self):
        return float(np.max(np.abs(self.dissipation)))

    def config_hash(self):
        return hashlib.sha256(json.dumps(self.meta, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def to_csv(self, path=None):
        head = dict(self.meta, lp_norms={str(k): v for k, v in self.lp_norms.items()},
                    attachments=self.attachments)
        head.setdefault("config_hash", self.config_hash())
        buf = io.StringIO()
        buf.write("# " + json.dumps(head, sort_keys=True, default=str) + "\n")
        buf.write("t,hamiltonian,energy,dissipation,circulation,center_x,center_y,umax\n")
        for s in self.snapshots:
            buf.write(",".join(repr(float(v)) for v in (s.t, s.hamiltonian, s.energy, s.dissipation,
                                                       s.circulation, s.center[0], s.center[1], s.umax)))
            buf.write("\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        head = json.loads(lines[0][2:])
        lp = {float(k): v for k, v in head.pop("lp_norms", {}).items()}
        att = head.pop("attachments", {})
        snaps = []
        for line in lines[2:]:
            v = [float(x) for x in line.split(",")]
            snaps.append(Snapshot(v[0], v[1], v[2], v[3], v[4], (v[5], v[6]), v[7]))
        return cls(head, snaps, lp, att)


def check_energy_balance(series: DiagnosticsSeries):
    """max_t |dE/dt - D| / (max_t |D| + floor) with centred differences.

    floor = 1e-14 (sum |Gamma_i|)^3 / eps keeps the all-zero case well posed.
    """
    t = series.times
    if t.size < 3:
        raise ValueError("energy balance needs at least 3 samples")
    dts = np.diff(t)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * abs(dts[0]):
        raise ValueError("energy balance needs a uniform sampling cadence")
    E = series.energy
    D = series.dissipation
    dEdt = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    floor = 1e-14 * series.meta["abs_circulation"] ** 3 / series.meta["eps"]
    return float(np.max(np.abs(dEdt - D[1:-1])) / (np.max(np.abs(D)) + floor))
