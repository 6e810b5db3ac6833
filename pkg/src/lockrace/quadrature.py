"""Composite Simpson quadrature with forced panel boundaries."""

from __future__ import annotations

import numpy as np


def panel_breaks(lo, hi, *kinks):
    """Sorted, de-duplicated breakpoints in ``[lo, hi]`` including both ends."""
    pts = [np.array([lo, hi], dtype=float)]
    for k in kinks:
        k = np.atleast_1d(np.asarray(k, dtype=float))
        pts.append(k[(k > lo) & (k < hi)])
    pts = np.unique(np.concatenate(pts))
    return pts


def simpson_nodes(breaks, sub=2):
    """Nodes and weights of composite Simpson over consecutive ``breaks``.

    Each panel is split into ``sub`` (even) equal subintervals.  ``sub`` may be
    an array giving a per-panel count.
    """
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return np.zeros(0), np.zeros(0)
    sub = np.broadcast_to(np.asarray(sub, dtype=int), a.shape)
    if np.any(sub % 2) or np.any(sub < 2):
        raise ValueError("Simpson needs an even number of subintervals per panel")
    if np.all(sub == sub[0]):
        m = int(sub[0])
        u = np.arange(m + 1) / m
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        h = (b - a) / m
        nodes = a[:, None] + (b - a)[:, None] * u
        weights = (h / 3.0)[:, None] * w
        return nodes.ravel(), weights.ravel()
    nodes, weights = [], []
    for lo, hi, m in zip(a, b, sub):
        u = np.arange(m + 1) / m
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        nodes.append(lo + (hi - lo) * u)
        weights.append((hi - lo) / m / 3.0 * w)
    return np.concatenate(nodes), np.concatenate(weights)


def simpson(f, lo, hi, *kinks, sub=2):
    """Integrate vectorised ``f`` over ``[lo, hi]`` with panels split at ``kinks``."""
    if hi <= lo:
        return 0.0
    nodes, weights = simpson_nodes(panel_breaks(lo, hi, *kinks), sub)
    return float(np.dot(weights, f(nodes)))
