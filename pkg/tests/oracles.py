"""Slow, independent reference computations used only by the tests."""
from __future__ import annotations

from itertools import combinations

import networkx as nx
import numpy as np


# ---- GF(2) linear algebra on python-int bit rows


def gf2_rank(rows) -> int:
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top not in basis:
                basis[top] = r
                break
            r ^= basis[top]
    return len(basis)


def gf2_nullspace(cols: list[int], n_rows: int) -> list[int]:
    """Kernel of a matrix given by its columns (bit masks over ``n_rows``); vectors as bit masks over columns."""
    n = len(cols)
    # augment each column with an identity tag so we can track combinations
    work = [(c, 1 << k) for k, c in enumerate(cols)]
    pivots: dict[int, tuple[int, int]] = {}
    kernel = []
    for c, tag in work:
        while c:
            top = c.bit_length() - 1
            if top not in pivots:
                pivots[top] = (c, tag)
                break
            pc, pt = pivots[top]
            c ^= pc
            tag ^= pt
        if not c:
            kernel.append(tag)
    assert len(kernel) + len(pivots) == n
    return kernel


# ---- persistence oracles


def pairwise(points, convention="radius"):
    x = np.asarray(points, float)
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    return d / 2.0 if convention == "radius" else d


def h1_betti_oracle(points, convention="radius"):
    """Degree-1 diagram from persistent Betti numbers of the clique complex.

    For critical values a_0 < ... < a_N, the rank of H1(K_i) -> H1(K_j) is
    dim(Z_i + B_j) - dim(B_j); interval multiplicities follow by
    inclusion-exclusion. Everything is recomputed from scratch per (i, j).
    """
    d = pairwise(points, convention)
    m = len(d)
    edges = list(combinations(range(m), 2))
    eidx = {e: k for k, e in enumerate(edges)}
    ev = np.array([d[i, j] for i, j in edges])
    tris = list(combinations(range(m), 3))
    tv = np.array([max(d[i, j], d[i, k], d[j, k]) for i, j, k in tris])
    crit = np.unique(ev)
    N = len(crit)

    def cycles(i):
        live = [k for k in range(len(edges)) if ev[k] <= crit[i]]
        cols = [(1 << edges[k][0]) | (1 << edges[k][1]) for k in live]
        out = []
        for tag in gf2_nullspace(cols, m):
            v = 0
            for pos, k in enumerate(live):
                if tag >> pos & 1:
                    v |= 1 << k
            out.append(v)
        return out

    def boundaries(j):
        out = []
        for t, (a, b, c) in enumerate(tris):
            if tv[t] <= crit[j]:
                out.append((1 << eidx[(a, b)]) | (1 << eidx[(a, c)]) | (1 << eidx[(b, c)]))
        return out

    Z = [cycles(i) for i in range(N)]
    Bd = [boundaries(j) for j in range(N)]
    rB = [gf2_rank(b) for b in Bd]

    def beta(i, j):
        # persistent Betti number for i <= j; beta(-1, .) = 0
        if i < 0:
            return 0
        return gf2_rank(Z[i] + Bd[j]) - rB[j]

    pairs = []
    for i in range(N):
        for j in range(i + 1, N):
            mu = beta(i, j - 1) - beta(i, j) - beta(i - 1, j - 1) + beta(i - 1, j)
            pairs += [(crit[i], crit[j])] * mu
        # classes still alive at the end would be essential; the full complex has none
        assert beta(i, N - 1) - beta(i - 1, N - 1) == 0
    return sorted(pairs)


def kruskal_deaths(points, convention="radius"):
    d = pairwise(points, convention)
    m = len(d)
    g = nx.Graph()
    g.add_nodes_from(range(m))
    for i, j in combinations(range(m), 2):
        g.add_edge(i, j, weight=d[i, j])
    t = nx.minimum_spanning_tree(g, algorithm="kruskal")
    return sorted(w for _, _, w in t.edges(data="weight"))


# ---- landscape oracles


def tent_grid(pairs, t):
    """All tent values on a grid, one row per pair."""
    p = np.asarray(pairs, float).reshape(-1, 2)
    return np.maximum(np.minimum(t[None, :] - p[:, :1], p[:, 1:] - t[None, :]), 0.0)


def landscape_grid(pairs, k, t):
    vals = tent_grid(pairs, t)
    if k > len(vals):
        return np.zeros_like(t)
    return -np.sort(-vals, axis=0)[k - 1]


def l2_quadrature(pa, pb, step=1e-4):
    pa = np.asarray(pa, float).reshape(-1, 2)
    pb = np.asarray(pb, float).reshape(-1, 2)
    both = np.concatenate([pa, pb])
    lo, hi = both.min() - 1.0, both.max() + 1.0
    t = np.arange(lo, hi + step, step)
    ka, kb = tent_grid(pa, t), tent_grid(pb, t)
    ka, kb = -np.sort(-ka, axis=0), -np.sort(-kb, axis=0)
    K = max(len(ka), len(kb))
    total = 0.0
    for k in range(K):
        a = ka[k] if k < len(ka) else 0.0
        b = kb[k] if k < len(kb) else 0.0
        total += np.trapezoid((a - b) ** 2, t)
    return float(np.sqrt(total))


# ---- likelihood oracle


def naive_loglik(adj, alpha, z):
    n = len(z)
    ll = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            eta = alpha - float(np.linalg.norm(z[i] - z[j]))
            p = 1.0 / (1.0 + np.exp(-eta))
            ll += adj[i, j] * np.log(p) + (1 - adj[i, j]) * np.log(1.0 - p)
    return ll


# ---- clustering oracles


def wcss(x, labels):
    x = np.asarray(x, float)
    if x.ndim == 1:
        x = x[:, None]
    total = 0.0
    for c in np.unique(labels):
        pts = x[labels == c]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def best_two_medoids(d2):
    n = len(d2)
    best = None
    for a, b in combinations(range(n), 2):
        cost = float(np.minimum(d2[:, a], d2[:, b]).sum())
        if best is None or cost < best[0]:
            best = (cost, (a, b))
    return best
