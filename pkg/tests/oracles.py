"""Brute-force reference solvers used by the test suite."""

import itertools

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment


def _partitions(n):
    """Every split of range(n) into consecutive blocks."""
    for cuts in itertools.product((False, True), repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        yield list(zip(bounds[:-1], bounds[1:]))


def isotonic_l2_oracle(y, w=None, lower=-np.inf, upper=np.inf):
    """Optimal weighted L2 monotone fit with box bounds, by enumeration.

    Every level set of the optimum takes its clipped weighted mean, so the
    optimum is the best feasible candidate over all block partitions.
    """
    y = np.asarray(y, float)
    w = np.ones_like(y) if w is None else np.asarray(w, float)
    best, best_x = np.inf, None
    for blocks in _partitions(y.size):
        vals = [np.clip(np.average(y[a:b], weights=w[a:b]), lower, upper) for a, b in blocks]
        if any(v2 < v1 for v1, v2 in zip(vals, vals[1:])):
            continue
        x = np.concatenate([np.full(b - a, v) for (a, b), v in zip(blocks, vals)])
        obj = float(np.sum(w * (y - x) ** 2))
        if obj < best:
            best, best_x = obj, x
    return best, best_x


def isotonic_l1_oracle(y, lower=-np.inf, upper=np.inf):
    """Optimal L1 monotone fit by dynamic programming over candidate values."""
    y = np.asarray(y, float)
    cands = set(np.clip(y, lower, upper).tolist())
    cands.update(v for v in (lower, upper) if np.isfinite(v))
    c = np.array(sorted(cands))
    f = np.abs(y[0] - c)
    for v in y[1:]:
        f = np.minimum.accumulate(f) + np.abs(v - c)
    return float(f.min())


def constrained_oracle(y, p, lower, last):
    """Objective of the best fit with values >= lower and the last one pinned."""
    y = np.asarray(y, float)
    tail = abs(y[-1] - last) ** p
    if y.size == 1:
        return tail
    head = y[:-1]
    if p == 2:
        return isotonic_l2_oracle(head, lower=lower, upper=last)[0] + tail
    return isotonic_l1_oracle(head, lower=lower, upper=last) + tail


def simplex_oracle(v, total):
    """Projection onto {x >= 0, sum x = total} by enumerating supports."""
    v = np.asarray(v, float)
    best, best_x = np.inf, None
    for r in range(1, v.size + 1):
        for support in itertools.combinations(range(v.size), r):
            s = list(support)
            theta = (v[s].sum() - total) / r
            x = np.zeros_like(v)
            x[s] = v[s] - theta
            if (x < -1e-12).any():
                continue
            d = float(np.sum((x - v) ** 2))
            if d < best:
                best, best_x = d, x
    return best_x


def assignment_cost(parent, children) -> int:
    """Least total |size difference| over perfect matchings (Hungarian)."""
    top = np.asarray(parent)
    bottom = np.concatenate([np.asarray(h) for h in children]) if children else np.zeros(0)
    if top.size == 0:
        return 0
    cost = np.abs(top[:, None] - bottom[None, :])
    r, c = linear_sum_assignment(cost)
    return int(cost[r, c].sum())


def emd_flow(h1, h2) -> int:
    g = nx.DiGraph()
    for i, c in enumerate(h1):
        g.add_node(("a", i), demand=-int(c))
    for j, c in enumerate(h2):
        g.add_node(("b", j), demand=int(c))
    for i in range(len(h1)):
        for j in range(len(h2)):
            g.add_edge(("a", i), ("b", j), weight=abs(i - j))
    return int(nx.min_cost_flow_cost(g))
