"""Particle discretization of the vorticity and filtered vortex dynamics.

The ensemble is the push-forward of a discretized initial vorticity: each
particle carries a fixed circulation and moves with the filtered velocity
u^eps = K^eps * q^eps, evaluated by direct summation.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate

from . import _summation as S
from .filters import RadialFilterSpec, builtin_filter
from .kernels import GridSpec, get_core

__all__ = [
    "InitialVorticitySpec",
    "BlobSpec",
    "ParticleEnsemble",
    "KernelContext",
    "SimulationConfig",
    "SimulationResult",
    "SimulationError",
    "kernel_context",
    "discretize",
    "velocity_at",
    "velocities",
    "step_rk4",
    "simulate",
    "cfl_timestep",
    "point_vortices",
    "trajectory_to_csv",
]

KINDS = ("gaussian_patch", "vortex_patch", "power_law", "multi_blob")


class SimulationError(RuntimeError):
    """Integration produced non-finite particle positions."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


# --------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class BlobSpec:
    """One component of a multi_blob initial condition."""

    profile: str
    center: tuple
    radius: float
    amplitude: float
    beta: float = 0.0
    sigma: Optional[float] = None


@dataclass(frozen=True)
class InitialVorticitySpec:
    """Compactly supported initial vorticity q0.

    gaussian_patch  A exp(-s^2/sigma^2) for s <= radius, where
                    s^2 = x'^2/aspect + aspect y'^2 (area preserving ellipse)
    vortex_patch    A on the disk of the given radius
    power_law       A |x - c|^(-beta) on the disk; in L^p iff beta p < 2
    multi_blob      sum of seeded random blobs of the chosen profile
    """

    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    amplitude: float = 1.0
    sigma: Optional[float] = None
    aspect: float = 1.0
    beta: float = 0.0
    count: int = 3
    seed: int = 0
    spread: float = 1.0
    blob_profile: str = "gaussian_patch"
    signed: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown initial vorticity kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind == "power_law" and not 0 <= self.beta < 2:
            raise ValueError("power_law needs 0 <= beta < 2")
        if self.aspect <= 0:
            raise ValueError("aspect must be positive")
        if self.kind == "multi_blob" and self.blob_profile not in ("gaussian_patch", "vortex_patch", "power_law"):
            raise ValueError(f"unknown blob profile {self.blob_profile!r}")

    @property
    def p_max(self):
        """Largest p with q0 in L^p (exclusive for power laws)."""
        if self.kind == "power_law" or (self.kind == "multi_blob" and self.blob_profile == "power_law"):
            return math.inf if self.beta == 0 else 2.0 / self.beta
        return math.inf

    def in_Lp(self, p):
        if self.kind == "power_law" or (self.kind == "multi_blob" and self.blob_profile == "power_law"):
            return self.beta * p < 2
        return True

    def blobs(self):
        """Components as BlobSpecs; multi_blob draws them from ``seed``."""
        if self.kind != "multi_blob":
            return [BlobSpec(self.kind, tuple(self.center), self.radius, self.amplitude,
                             self.beta, self.sigma)]
        rng = np.random.default_rng(self.seed)
        out = []
        for _ in range(self.count):
            ang = rng.uniform(0, 2 * math.pi)
            rad = self.spread * math.sqrt(rng.uniform(0, 1))
            c = (self.center[0] + rad * math.cos(ang), self.center[1] + rad * math.sin(ang))
            amp = self.amplitude * rng.uniform(0.5, 1.5)
            if self.signed and rng.uniform() < 0.5:
                amp = -amp
            out.append(BlobSpec(self.blob_profile, c, self.radius, amp, self.beta, self.sigma))
        return out

    def support_radius(self):
        """Radius of a disk about ``center`` containing the support."""
        r = 0.0
        for b in self.blobs():
            ext = b.radius * max(self.aspect, 1.0 / self.aspect) ** 0.5 if b.profile == "gaussian_patch" else b.radius
            r = max(r, math.hypot(b.center[0] - self.center[0], b.center[1] - self.center[1]) + ext)
        return r

    def total_circulation(self):
        """Exact integral of q0."""
        tot = 0.0
        for b in self.blobs():
            if b.profile == "gaussian_patch":
                sig = b.sigma or b.radius / 3.0
                tot += b.amplitude * math.pi * sig**2 * -math.expm1(-(b.radius / sig) ** 2)
            elif b.profile == "vortex_patch":
                tot += b.amplitude * math.pi * b.radius**2
            else:
                tot += b.amplitude * 2 * math.pi * b.radius ** (2 - b.beta) / (2 - b.beta)
        return tot

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        q = np.zeros(np.broadcast(x, y).shape)
        for b in self.blobs():
            dx, dy = x - b.center[0], y - b.center[1]
            if b.profile == "gaussian_patch":
                s2 = dx * dx / self.aspect + self.aspect * dy * dy
                sig = b.sigma or b.radius / 3.0
                q += np.where(s2 <= b.radius**2, b.amplitude * np.exp(-s2 / sig**2), 0.0)
            elif b.profile == "vortex_patch":
                q += np.where(dx * dx + dy * dy <= b.radius**2, b.amplitude, 0.0)
            else:
                r = np.hypot(dx, dy)
                with np.errstate(divide="ignore"):
                    q += np.where((r <= b.radius) & (r > 0), b.amplitude * r ** (-b.beta), 0.0)
        return q


def _corner_integral(a, b, beta):
    """int_0^a int_0^b (x^2 + y^2)^(-beta/2) dy dx in polar form."""
    if a <= 0 or b <= 0:
        return 0.0
    k = 2.0 - beta
    ts = math.atan2(b, a)
    i1, _ = integrate.quad(lambda t: math.cos(t) ** (-k), 0.0, ts, epsabs=0, epsrel=1e-12)
    i2, _ = integrate.quad(lambda t: math.sin(t) ** (-k), ts, math.pi / 2, epsabs=0, epsrel=1e-12)
    return (a**k * i1 + b**k * i2) / k


def _cell_power_integral(cx, cy, half, px, py, beta):
    """Integral of |x - p|^(-beta) over the square cell centred at (cx, cy)."""
    x0, x1 = cx - half - px, cx + half - px
    y0, y1 = cy - half - py, cy + half - py
    tot = 0.0
    # split the cell into four rectangles sharing the corner p
    for sx, (lo, hi) in ((1, (max(x0, 0.0), x1)), (-1, (max(-x1, 0.0), -x0))):
        if hi <= lo:
            continue
        for sy, (blo, bhi) in ((1, (max(y0, 0.0), y1)), (-1, (max(-y1, 0.0), -y0))):
            if bhi <= blo:
                continue
            tot += (_corner_integral(hi, bhi, beta) - _corner_integral(lo, bhi, beta)
                    - _corner_integral(hi, blo, beta) + _corner_integral(lo, blo, beta))
    return tot


@dataclass(frozen=True, eq=False)
class KernelContext:
    """Everything the compiled sums need for one (filter, eps)."""

    filter: RadialFilterSpec
    eps: float
    kind: int
    core: object

    def tab(self, name):
        t = self.core.tables[name]
        return t.data, t.par


_CTX_CACHE = {}


def kernel_context(spec: RadialFilterSpec, eps: float, grid: GridSpec = GridSpec()):
    key = (spec.key, float(eps), grid)
    ctx = _CTX_CACHE.get(key)
    if ctx is None:
        kind = {"gaussian": S.KIND_GAUSSIAN, "algebraic_blob": S.KIND_BLOB}.get(spec.name, S.KIND_TABLE)
        ctx = KernelContext(spec, float(eps), kind, get_core(spec, grid))
        _CTX_CACHE[key] = ctx
    return ctx


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    circulations: np.ndarray
    eps: float
    filter: RadialFilterSpec
    t: float = 0.0
    cell_area: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        gam = np.ascontiguousarray(self.circulations, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or gam.shape != (pos.shape[0],):
            raise ValueError("positions must be (N, 2) and circulations (N,)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("particle positions must be finite")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "circulations", gam)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def context(self):
        return kernel_context(self.filter, self.eps)

    def total_circulation(self):
        return float(np.sum(self.circulations))

    def center_of_vorticity(self):
        return self.circulations @ self.positions

    def with_positions(self, pos, t):
        return replace(self, positions=pos, t=t)

    def lp_surrogate(self, p):
        """Lagrangian ||q||_{L^p}: cell values Gamma_i / cell_area over cells of that area."""
        if self.cell_area <= 0:
            raise ValueError("ensemble has no cell measure")
        a = self.cell_area
        g = np.abs(self.circulations)
        if math.isinf(p):
            return float(np.max(g) / a)
        return float(np.sum(g**p * a ** (1 - p)) ** (1.0 / p))


def point_vortices(positions, circulations, eps, filter=None):
    """Ensemble of explicit point vortices (no cell measure)."""
    filter = filter or builtin_filter("gaussian")
    return ParticleEnsemble(np.asarray(positions, float), np.asarray(circulations, float), eps, filter)


def discretize(spec: InitialVorticitySpec, delta: float, eps: float,
               filter: Optional[RadialFilterSpec] = None):
    """Particles at the centres of a uniform mesh of cell size ``delta``.

    Circulations are midpoint-rule cell integrals; for power-law components the
    cells touching a singular point get the exact cell integral instead.
    """
    if not delta > 0:
        raise ValueError("mesh size must be positive")
    blobs = spec.blobs()
    if delta > min(b.radius for b in blobs):
        raise ValueError(f"mesh size {delta} exceeds the support radius")
    filter = filter or builtin_filter("gaussian")
    # mesh aligned with the centre so single-core data has a cell centred on it
    cx, cy = spec.center
    R = spec.support_radius()
    k = int(math.ceil(R / delta)) + 1
    ii = np.arange(-k, k + 1)
    X, Y = np.meshgrid(cx + ii * delta, cy + ii * delta, indexing="xy")
    X, Y = X.ravel(), Y.ravel()
    q = spec(X, Y)
    gam = q * delta * delta
    half = 0.5 * delta
    for b in blobs:
        if b.profile != "power_law":
            continue
        near = (np.abs(X - b.center[0]) <= half * (1 + 1e-12)) & (np.abs(Y - b.center[1]) <= half * (1 + 1e-12))
        for idx in np.flatnonzero(near):
            # replace this blob's midpoint sample by the exact cell integral
            r = math.hypot(X[idx] - b.center[0], Y[idx] - b.center[1])
            mid = b.amplitude * r ** (-b.beta) * delta * delta if r > 0 else 0.0
            exact = b.amplitude * _cell_power_integral(X[idx], Y[idx], half, b.center[0], b.center[1], b.beta)
            gam[idx] += exact - mid
    keep = gam != 0
    return ParticleEnsemble(np.column_stack([X[keep], Y[keep]]), gam[keep], eps, filter,
                            0.0, delta * delta, {"delta": delta, "initial": spec})


# --------------------------------------------------------------------------
# dynamics


def velocities(ens: ParticleEnsemble, positions=None):
    """u^eps at every particle, excluding the (zero) self term."""
    ctx = ens.context
    pos = ens.positions if positions is None else positions
    mdata, mpar = ctx.tab("m")
    u, v = S.pair_velocities(np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]),
                             ens.circulations, ctx.eps, ctx.kind, mdata, mpar)
    return np.column_stack([u, v])


def velocity_at(ens: ParticleEnsemble, x):
    """sum_i K^eps(x - x_i) Gamma_i at one or many points."""
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    ctx = ens.context
    mdata, mpar = ctx.tab("m")
    u, v = S.target_velocities(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
                               np.ascontiguousarray(ens.positions[:, 0]),
                               np.ascontiguousarray(ens.positions[:, 1]),
                               ens.circulations, ctx.eps, ctx.kind, mdata, mpar)
    out = np.column_stack([u, v])
    return out[0] if x.ndim == 1 else out


def step_rk4(ens: ParticleEnsemble, dt: float, k1=None):
    """Classical fourth-order Runge-Kutta step of the particle ODE."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = ens.positions
    if k1 is None:
        k1 = velocities(ens, x)
    k2 = velocities(ens, x + 0.5 * dt * k1)
    k3 = velocities(ens, x + 0.5 * dt * k2)
    k4 = velocities(ens, x + dt * k3)
    new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        bad = np.flatnonzero(~np.all(np.isfinite(new), axis=1))
        dump = {"t": ens.t, "dt": dt, "bad_indices": bad.tolist()[:20],
                "positions": x.copy(), "circulations": ens.circulations.copy()}
        raise SimulationError(
            f"non-finite positions for {bad.size} particle(s) after step at t={ens.t:.6g} "
            f"(dt={dt:g}, first indices {bad[:5].tolist()})", dump)
    return replace(ens, positions=new, t=ens.t + dt)


def cfl_timestep(ens: ParticleEnsemble, delta: float, factor=0.2):
    """dt = factor * delta / max |u^eps| at the current state."""
    umax = float(np.max(np.hypot(*velocities(ens).T))) if ens.n > 1 else 0.0
    if umax == 0:
        return math.inf
    return factor * delta / umax


@dataclass
class SimulationConfig:
    initial: Optional[InitialVorticitySpec] = None
    eps: float = 0.1
    filter: RadialFilterSpec = field(default_factory=lambda: builtin_filter("gaussian"))
    delta: Optional[float] = None
    dt: Optional[float] = None
    T: float = 1.0
    cadence: Optional[float] = None
    record_trajectory: bool = False
    ensemble: Optional[ParticleEnsemble] = None
    lp_exponents: tuple = (1.0, 2.0)

    def build_ensemble(self):
        if self.ensemble is not None:
            return replace(self.ensemble, eps=self.eps, filter=self.filter)
        if self.initial is None or self.delta is None:
            raise ValueError("need either an explicit ensemble or initial data with a mesh size")
        return discretize(self.initial, self.delta, self.eps, self.filter)


@dataclass
class SimulationResult:
    final: ParticleEnsemble
    series: object
    dt: float
    steps: int
    frames: list = field(default_factory=list)


def simulate(config: SimulationConfig):
    """Advance to time T, recording diagnostics every ``cadence``.

    The time step is adjusted down so that the cadence is an integer number of
    steps.  Without an explicit dt the CFL rule 0.2 delta / max|u| at t = 0 is
    used (delta falls back to eps for explicit point-vortex ensembles).
    """
    from .diagnostics import DiagnosticsSeries, diagnostics_snapshot

    ens = config.build_ensemble()
    T = float(config.T)
    if T < 0:
        raise ValueError("T must be non-negative")
    dt = config.dt
    if dt is None:
        delta = config.delta or ens.meta.get("delta") or config.eps
        dt = cfl_timestep(ens, delta)
        if not math.isfinite(dt):
            dt = T if T > 0 else 1.0
    cadence = config.cadence or (T if T > 0 else 1.0)
    n_out = int(round(T / cadence)) if T > 0 else 0
    if T > 0 and abs(n_out * cadence - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of the cadence")
    per = max(1, int(math.ceil(cadence / dt - 1e-9)))
    dt = cadence / per
    series = DiagnosticsSeries.empty(ens, config)
    frames = []
    u = velocities(ens)
    series.append(diagnostics_snapshot(ens, u))
    if config.record_trajectory:
        frames.append((ens.t, ens.positions.copy()))
    steps = 0
    t0 = ens.t
    for k in range(1, n_out + 1):
        for _ in range(per):
            ens = step_rk4(ens, dt, k1=u)
            steps += 1
            u = velocities(ens)
        # pin the clock to the cadence to avoid drift from repeated additions
        ens = replace(ens, t=t0 + k * cadence)
        series.append(diagnostics_snapshot(ens, u))
        if config.record_trajectory:
            frames.append((ens.t, ens.positions.copy()))
    return SimulationResult(ens, series, dt, steps, frames)


def trajectory_to_csv(frames, circulations, path=None, header=None):
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    buf.write("t,i,x,y,gamma\n")
    idx = np.arange(len(circulations))
    for t, pos in frames:
        block = np.column_stack([np.full(idx.size, t), idx, pos[:, 0], pos[:, 1], circulations])
        np.savetxt(buf, block, delimiter=",", fmt=["%.17g", "%d", "%.17g", "%.17g", "%.17g"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
