"""Grid evaluation of omega^eps, u^eps, the commutator residual r^eps, the
energy defect R^eps, discrete L^p norms and the L^3 Onsager modulus.

Grids are cell centred: node (i, j) sits at (x0 + (i + 1/2) h, y0 + (j + 1/2) h).
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _summation as S

__all__ = [
    "Grid",
    "GridField",
    "default_grid",
    "eval_filtered_vorticity",
    "eval_velocity_grid",
    "commutator_residual",
    "energy_defect",
    "lp_norm",
    "grad_norm",
    "onsager_modulus",
    "default_shifts",
    "active_mask",
    "residual_bound",
]


@dataclass(frozen=True)
class Grid:
    x0: float
    y0: float
    nx: int
    ny: int
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one node per axis")

    @classmethod
    def from_box(cls, box, h):
        """Cells of size h covering box = (xmin, xmax, ymin, ymax)."""
        xmin, xmax, ymin, ymax = box
        nx = max(1, int(math.ceil((xmax - xmin) / h - 1e-9)))
        ny = max(1, int(math.ceil((ymax - ymin) / h - 1e-9)))
        return cls(float(xmin), float(ymin), nx, ny, float(h))

    @property
    def box(self):
        return (self.x0, self.x0 + self.nx * self.h, self.y0, self.y0 + self.ny * self.h)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def xc(self):
        return self.x0 + (np.arange(self.nx) + 0.5) * self.h

    @property
    def yc(self):
        return self.y0 + (np.arange(self.ny) + 0.5) * self.h

    def nodes(self):
        X, Y = np.meshgrid(self.xc, self.yc, indexing="xy")
        return X, Y

    def extended(self, kx, ky):
        """Same lattice padded by kx, ky cells on every side."""
        return Grid(self.x0 - kx * self.h, self.y0 - ky * self.h, self.nx + 2 * kx, self.ny + 2 * ky, self.h)


@dataclass
class GridField:
    grid: Grid
    values: np.ndarray
    mask: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[:2] != self.grid.shape:
            raise ValueError("values do not match the grid shape")
        self.values = v
        if self.mask is None:
            self.mask = np.ones(self.grid.shape, dtype=bool)
        if not np.all(np.isfinite(v[self.mask])):
            raise ValueError("grid values must be finite on unflagged nodes")

    @property
    def is_vector(self):
        return self.values.ndim == 3

    def magnitude(self):
        if self.is_vector:
            return np.hypot(self.values[..., 0], self.values[..., 1])
        return np.abs(self.values)

    def to_csv(self, path=None):
        X, Y = self.grid.nodes()
        m = self.mask
        cols = [X[m], Y[m]]
        names = ["x", "y"]
        if self.is_vector:
            cols += [self.values[..., 0][m], self.values[..., 1][m]]
            names += ["vx", "vy"]
        else:
            cols.append(self.values[m])
            names.append("value")
        buf = io.StringIO()
        if self.meta:
            buf.write("# " + json.dumps(self.meta, sort_keys=True, default=str) + "\n")
        buf.write(",".join(names) + "\n")
        np.savetxt(buf, np.column_stack(cols), delimiter=",", fmt="%.17g")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_raster(self, stem):
        """Write ``stem.raw`` (little-endian float64, row-major) and ``stem.json``."""
        vals = np.where(self.mask[..., None] if self.is_vector else self.mask, self.values, np.nan)
        vals.astype("<f8").tofile(f"{stem}.raw")
        side = {"x0": self.grid.x0, "y0": self.grid.y0, "nx": self.grid.nx, "ny": self.grid.ny,
                "h": self.grid.h, "components": 2 if self.is_vector else 1, "dtype": "<f8",
                "order": "row-major (y, x[, component])", "meta": self.meta}
        with open(f"{stem}.json", "w") as fh:
            json.dump(side, fh, sort_keys=True, indent=1, default=str)

    @classmethod
    def from_raster(cls, stem):
        with open(f"{stem}.json") as fh:
            side = json.load(fh)
        grid = Grid(side["x0"], side["y0"], side["nx"], side["ny"], side["h"])
        shape = grid.shape + ((2,) if side["components"] == 2 else ())
        vals = np.fromfile(f"{stem}.raw", dtype="<f8").reshape(shape)
        mask = np.all(np.isfinite(vals), axis=-1) if side["components"] == 2 else np.isfinite(vals)
        return cls(grid, np.nan_to_num(vals), mask, side.get("meta", {}))


def default_grid(ens, eps_max=None, support_radius=None, center=None, h=None):
    """B_R with R = 2 (support radius) + 10 eps_max and spacing eps/8."""
    eps_max = eps_max or ens.eps
    if support_radius is None:
        c = np.asarray(center if center is not None else ens.positions.mean(axis=0))
        support_radius = float(np.max(np.hypot(*(ens.positions - c).T))) if ens.n else 0.0
    else:
        c = np.asarray(center if center is not None else (0.0, 0.0))
    R = 2.0 * support_radius + 10.0 * eps_max
    return Grid.from_box((c[0] - R, c[0] + R, c[1] - R, c[1] + R), h or ens.eps / 8.0)


# --------------------------------------------------------------------------
# evaluation helpers


def _bins(ens, cell):
    x = ens.positions[:, 0]
    y = ens.positions[:, 1]
    ox, oy = float(x.min()) - cell, float(y.min()) - cell
    ncx = int((x.max() - ox) / cell) + 2
    ncy = int((y.max() - oy) / cell) + 2
    ix = np.floor((x - ox) / cell).astype(np.int64)
    iy = np.floor((y - oy) / cell).astype(np.int64)
    cid = iy * ncx + ix
    order = np.argsort(cid, kind="stable").astype(np.int64)
    counts = np.bincount(cid, minlength=ncx * ncy)
    cells = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return order, cells, ox, oy, ncx, ncy


def _cutoff(ens):
    return ens.filter.support_radius * ens.eps


def _filtered_sums(ens, tx, ty, weights):
    """sum_i h^eps(t - x_i) w_i for targets (tx, ty) and weight columns."""
    ctx = ens.context
    hd, hp = ctx.tab("h")
    cut = _cutoff(ens)
    if math.isfinite(cut):
        cell = cut
        order, cells, ox, oy, ncx, ncy = _bins(ens, cell)
        cutv = cut
    else:
        order = np.arange(ens.n, dtype=np.int64)
        cells = np.array([0, ens.n], dtype=np.int64)
        ox = oy = 0.0
        ncx = ncy = 1
        cell = 1.0
        cutv = 1e308
    w = np.ascontiguousarray(weights, dtype=float)
    return S.target_filtered_sums(np.ascontiguousarray(tx), np.ascontiguousarray(ty),
                                  np.ascontiguousarray(ens.positions[:, 0]),
                                  np.ascontiguousarray(ens.positions[:, 1]),
                                  w, ens.eps, cutv, hd, hp, order, cells, cell, ox, oy, ncx, ncy)


def active_mask(ens, grid):
    """Nodes within the filter cutoff of some particle (all nodes if unbounded)."""
    cut = _cutoff(ens)
    if not math.isfinite(cut):
        return np.ones(grid.shape, dtype=bool)
    return _disk_cover(ens, grid, cut)


def _disk_cover(ens, grid, cut):
    # mark lattice cells touched by the disk of radius cut about each particle
    mask = np.zeros(grid.shape, dtype=bool)
    h = grid.h
    k = int(math.ceil(cut / h)) + 1
    off = np.arange(-k, k + 1)
    OX, OY = np.meshgrid(off, off, indexing="xy")
    disk = (np.abs(OX) * h - h) ** 2 + (np.abs(OY) * h - h) ** 2 <= cut * cut
    ox, oy = OX[disk], OY[disk]
    ix = np.floor((ens.positions[:, 0] - grid.x0) / h).astype(np.int64)
    iy = np.floor((ens.positions[:, 1] - grid.y0) / h).astype(np.int64)
    # particles sharing a lattice cell mark the same nodes
    ix_u, iy_u = np.unique(np.column_stack([ix, iy]), axis=0).T
    for dx, dy in zip(ox, oy):
        jx, jy = ix_u + dx, iy_u + dy
        ok = (jx >= 0) & (jx < grid.nx) & (jy >= 0) & (jy < grid.ny)
        mask[jy[ok], jx[ok]] = True
    return mask


def _coincident(ens, X, Y):
    if not ens.filter.singular_origin:
        return np.zeros(X.shape, dtype=bool)
    pts = {(float(a), float(b)) for a, b in ens.positions}
    return np.array([(float(a), float(b)) in pts for a, b in zip(X.ravel(), Y.ravel())]).reshape(X.shape)


def eval_filtered_vorticity(ens, grid: Grid, mask=None):
    """omega^eps at the nodes; nodes on a particle are flagged for singular filters."""
    X, Y = grid.nodes()
    sel = np.ones(grid.shape, dtype=bool) if mask is None else mask.copy()
    bad = _coincident(ens, X, Y)
    sel &= ~bad
    vals = np.zeros(grid.shape)
    if np.any(sel):
        vals[sel] = _filtered_sums(ens, X[sel], Y[sel], ens.circulations[:, None])[:, 0]
    return GridField(grid, vals, ~bad, {"field": "omega_eps", "eps": ens.eps})


def eval_velocity_grid(ens, grid: Grid, mask=None):
    """u^eps at the nodes (optionally only where ``mask`` is set, zero elsewhere)."""
    from .particles import velocity_at

    X, Y = grid.nodes()
    vals = np.zeros(grid.shape + (2,))
    sel = np.ones(grid.shape, dtype=bool) if mask is None else mask
    if np.any(sel):
        vals[sel] = velocity_at(ens, np.column_stack([X[sel], Y[sel]]))
    return GridField(grid, vals, None, {"field": "u_eps", "eps": ens.eps})


def _residual_parts(ens, grid, u_particles=None, mask=None):
    from .particles import velocities

    if u_particles is None:
        u_particles = velocities(ens)
    X, Y = grid.nodes()
    act = active_mask(ens, grid) if mask is None else mask
    bad = _coincident(ens, X, Y)
    act = act & ~bad
    g = ens.circulations
    W = np.column_stack([g, u_particles[:, 0] * g, u_particles[:, 1] * g])
    sums = np.zeros(grid.shape + (3,))
    uu = np.zeros(grid.shape + (2,))
    if np.any(act):
        sums[act] = _filtered_sums(ens, X[act], Y[act], W)
        uu[act] = eval_velocity_grid(ens, grid, act).values[act]
    return sums, uu, ~bad


def commutator_residual(ens, grid: Grid, u_particles=None, mask=None):
    """r^eps = h^eps * (u q) - u omega^eps at the nodes (zero away from the particles)."""
    sums, uu, ok = _residual_parts(ens, grid, u_particles, mask)
    omega = sums[..., 0]
    r = sums[..., 1:] - uu * omega[..., None]
    return GridField(grid, r, ok, {"field": "commutator_residual", "eps": ens.eps})


def energy_defect(ens, grid: Grid, u_particles=None, mask=None):
    """R^eps = u . (h^eps * (u^perp q) - u^perp omega^eps) at the nodes."""
    sums, uu, ok = _residual_parts(ens, grid, u_particles, mask)
    omega = sums[..., 0]
    # (u_i)^perp = (-v_i, u_i), so h * (u^perp q) = (-S_v, S_u)
    ax, ay = -sums[..., 2], sums[..., 1]
    ux, uy = uu[..., 0], uu[..., 1]
    # u . u^perp = ux * (-uy) + uy * ux vanishes exactly in floating point
    R = (ux * ax + uy * ay) - (ux * (-uy) + uy * ux) * omega
    return GridField(grid, R, ok, {"field": "energy_defect", "eps": ens.eps})


def lp_norm(f: GridField, p):
    """(sum |v|^p h^2)^(1/p) over unflagged nodes, or the max for p = inf."""
    if p < 1:
        raise ValueError("p must be >= 1")
    mag = f.magnitude()[f.mask]
    if math.isinf(p):
        return float(mag.max()) if mag.size else 0.0
    return float(np.sum(mag**p) * f.grid.h**2) ** (1.0 / p)


def grad_norm(u: GridField, p):
    """L^p norm of the Frobenius norm of grad u by centred differences (interior nodes)."""
    v = u.values
    h = u.grid.h
    dxu = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    dyu = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    g = np.sqrt(np.sum(dxu**2, axis=-1) + np.sum(dyu**2, axis=-1))
    if math.isinf(p):
        return float(g.max())
    return float(np.sum(g**p) * h * h) ** (1.0 / p)


def residual_bound(ens, u_grid: GridField, beta, gamma):
    """eps ||w_1 h||_{L^1} ||grad u^eps||_{L^beta} ||q||_{L^gamma} with the Lagrangian q norm."""
    from scipy import integrate

    spec = ens.filter
    w1h, _ = integrate.quad(lambda r: 2 * math.pi * r * r * abs(spec.profile(np.array(r))), 0, np.inf,
                            limit=400)
    return ens.eps * w1h * grad_norm(u_grid, beta) * ens.lp_surrogate(gamma)


def default_shifts(h, box_size, directions=16, magnitudes=8):
    """Lattice shifts from 16 directions x 8 log-spaced magnitudes in [2h, box/4]."""
    lo, hi = 2.0 * h, box_size / 4.0
    if hi < lo:
        raise ValueError("box too small for resolvable shifts")
    out = set()
    for r in np.geomspace(lo, hi, magnitudes):
        for k in range(directions):
            a = 2 * math.pi * k / directions
            kx, ky = int(round(r * math.cos(a) / h)), int(round(r * math.sin(a) / h))
            if lo - 1e-12 <= math.hypot(kx, ky) * h <= hi + 1e-12:
                out.add((kx, ky))
    return sorted(out)


def onsager_modulus(ens, grid: Grid, shifts=None, a=1.0 / 3.0, return_all=False, u_ext=None):
    """sup_y ||u^eps(. - y) - u^eps||_{L^3(box)} / |y|^a over lattice shifts.

    ``shifts`` are integer lattice offsets (kx, ky) or physical vectors, which
    are snapped to the nearest lattice vector.  Shifts shorter than 2h or
    longer than a quarter of the box are rejected.
    """
    h = grid.h
    box = min(grid.nx, grid.ny) * h
    if shifts is None:
        lattice = default_shifts(h, box)
    else:
        lattice = []
        for s in shifts:
            s = tuple(s)
            if all(isinstance(c, (int, np.integer)) for c in s):
                kx, ky = int(s[0]), int(s[1])
            else:
                kx, ky = int(round(s[0] / h)), int(round(s[1] / h))
            lattice.append((kx, ky))
    for kx, ky in lattice:
        L = math.hypot(kx, ky) * h
        if L < 2 * h - 1e-12:
            raise ValueError(f"shift ({kx}, {ky}) is below the grid resolution 2h")
        if L > box / 4 + 1e-12:
            raise ValueError(f"shift ({kx}, {ky}) exceeds a quarter of the box")
    K = max(max(abs(kx), abs(ky)) for kx, ky in lattice)
    ext = grid.extended(K, K)
    if u_ext is None:
        u_ext = eval_velocity_grid(ens, ext).values
    core = u_ext[K:K + grid.ny, K:K + grid.nx]
    vals = {}
    for kx, ky in lattice:
        # u(x - y) on the base grid is the extended field offset by -y
        sh = u_ext[K - ky:K - ky + grid.ny, K - kx:K - kx + grid.nx]
        d = np.hypot(sh[..., 0] - core[..., 0], sh[..., 1] - core[..., 1])
        norm = float(np.sum(d**3) * h * h) ** (1.0 / 3.0)
        vals[(kx, ky)] = norm / (math.hypot(kx, ky) * h) ** a
    best = max(vals.values())
    return (best, vals) if return_all else best
