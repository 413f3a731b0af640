"""Composite Gauss-Legendre rules used by the radial kernel engine.

All rules are returned as ``(nodes, weights)`` so that ``weights @ f(nodes)``
approximates the integral.  Panels adjacent to a declared kink use a
cosine-clustered map, which turns square-root endpoint behaviour into a
smooth integrand.
"""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel(a, b, order, cluster):
    x, w = gauss_legendre(order)
    if not cluster:
        half = 0.5 * (b - a)
        return a + half * (x + 1.0), half * w
    # t = a + (b - a) (1 - cos(pi v)) / 2, v in [0, 1]
    v = 0.5 * (x + 1.0)
    t = a + (b - a) * 0.5 * (1.0 - np.cos(np.pi * v))
    jac = (b - a) * 0.5 * np.pi * np.sin(np.pi * v)
    return t, 0.5 * w * jac


def panel_rule(edges, order=8, kinks=(), kink_order=16):
    """Composite rule over consecutive panels given by ``edges``.

    A panel touching any point of ``kinks`` is integrated with the clustered
    map and ``kink_order`` nodes.
    """
    edges = np.asarray(edges, dtype=float)
    kinks = np.asarray(kinks, dtype=float)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        tol = 1e-12 * max(abs(a), abs(b), 1e-300)
        touched = kinks.size and np.any(
            (np.abs(kinks - a) <= tol) | (np.abs(kinks - b) <= tol))
        t, w = _panel(a, b, kink_order if touched else order, touched)
        nodes.append(t)
        weights.append(w)
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)


def log_rule(lo, hi, width=0.5, order=8, kinks=(), kink_order=16):
    """Rule for ``int_lo^hi f(t) dt`` built on panels uniform in ``log t``.

    ``kinks`` (values of ``t``) become panel edges with clustered panels on
    both sides.  The returned weights include the Jacobian ``dt = t du``.
    """
    if not 0.0 < lo < hi:
        raise ValueError("log_rule needs 0 < lo < hi")
    ulo, uhi = np.log(lo), np.log(hi)
    n = max(1, int(np.ceil((uhi - ulo) / width)))
    edges = np.linspace(ulo, uhi, n + 1)
    ks = [np.log(k) for k in kinks if lo < k < hi]
    if ks:
        ks_arr = np.asarray(ks)
        near = np.min(np.abs(edges[:, None] - ks_arr[None, :]), axis=1) < 1e-3 * width
        near[[0, -1]] = False
        edges = np.unique(np.concatenate([edges[~near], ks_arr]))
    u, w = panel_rule(edges, order=order, kinks=ks, kink_order=kink_order)
    t = np.exp(u)
    return t, w * t
