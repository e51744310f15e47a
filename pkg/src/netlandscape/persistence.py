"""Vietoris-Rips persistence in degrees 0 and 1, and bottleneck distance."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import pdist

CONVENTIONS = ("radius", "diameter")


@dataclass(frozen=True, eq=False)
class Filtration:
    """Edges of the Rips complex sorted by (value, i, j)."""

    points: np.ndarray
    edges: np.ndarray
    values: np.ndarray
    convention: str
    max_filtration: float

    @property
    def m(self) -> int:
        return len(self.points)

    def edge_ranks(self) -> np.ndarray:
        """``m x m`` matrix holding each edge's position in the filtration order."""
        r = np.full((self.m, self.m), -1, dtype=np.int64)
        k = np.arange(len(self.edges))
        r[self.edges[:, 0], self.edges[:, 1]] = k
        r[self.edges[:, 1], self.edges[:, 0]] = k
        return r


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    order: int
    pairs: np.ndarray  # (K, 2) birth, death; rows sorted lexicographically
    max_filtration: float

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.float64).reshape(-1, 2)
        if len(p):
            p = p[np.lexsort((p[:, 1], p[:, 0]))]
        object.__setattr__(self, "pairs", p)

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return (
            self.order == other.order
            and self.max_filtration == other.max_filtration
            and np.array_equal(self.pairs, other.pairs)
        )

    def scaled(self, c: float) -> "PersistenceDiagram":
        return PersistenceDiagram(self.order, self.pairs * c, self.max_filtration * c)


def vr_filtration(points, convention: str = "radius", max_filtration: float | None = None) -> Filtration:
    """Rips filtration of a point cloud.

    ``max_filtration`` defaults to the largest edge value; a larger common value
    can be supplied so that a population of clouds shares one truncation point.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("need a non-empty (m, d) point array")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    m = len(pts)
    iu, ju = np.triu_indices(m, k=1)
    vals = pdist(pts) if m > 1 else np.zeros(0)
    if convention == "radius":
        vals = vals / 2.0
    order = np.lexsort((ju, iu, vals))
    edges = np.column_stack([iu[order], ju[order]])
    vals = vals[order]
    maxf = float(vals[-1]) if len(vals) else 0.0
    if max_filtration is not None:
        if max_filtration < maxf:
            raise ValueError(f"max_filtration {max_filtration} below largest edge value {maxf}")
        maxf = float(max_filtration)
    return Filtration(pts, edges, vals, convention, maxf)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root


def _merge_edges(f: Filtration) -> np.ndarray:
    """Boolean mask of edges that join two components (the minimum spanning forest)."""
    uf = _UnionFind(f.m)
    mask = np.zeros(len(f.edges), dtype=bool)
    merged = 0
    for k, (i, j) in enumerate(f.edges.tolist()):
        ri, rj = uf.find(i), uf.find(j)
        if ri == rj:
            continue
        # all births are 0: elder rule tie goes to the lower root index
        if ri < rj:
            uf.parent[rj] = ri
        else:
            uf.parent[ri] = rj
        mask[k] = True
        merged += 1
        if merged == f.m - 1:
            break
    return mask


def diagram_h0(f: Filtration) -> PersistenceDiagram:
    mask = _merge_edges(f)
    deaths = f.values[mask]
    n_essential = f.m - len(deaths)
    d = np.concatenate([deaths, np.full(n_essential, f.max_filtration)])
    return PersistenceDiagram(0, np.column_stack([np.zeros_like(d), d]), f.max_filtration)


def _cofacets(i, j, m, ranks):
    """Filtration keys of all triangles containing edge (i, j).

    A triangle's key orders it by its youngest edge, then by its sorted
    vertex triple; smaller key means earlier in the filtration.
    """
    k = np.arange(m)
    k = k[(k != i) & (k != j)]
    diam = np.maximum(np.maximum(ranks[i, j], ranks[i, k]), ranks[j, k])
    tri = np.sort(np.column_stack([np.full_like(k, i), np.full_like(k, j), k]), axis=1)
    return diam * m**3 + (tri[:, 0] * m + tri[:, 1]) * m + tri[:, 2]


def _oldest_cofacets(m, ranks):
    """``out[i, j]`` = key of the earliest triangle containing edge (i, j)."""
    m3 = m**3
    out = np.full((m, m), np.iinfo(np.int64).max, dtype=np.int64)
    k = np.arange(m)
    for i in range(m - 1):
        j = np.arange(i + 1, m)[:, None]
        diam = np.maximum(np.maximum(ranks[i, j], ranks[i, k][None, :]), ranks[j, k[None, :]])
        lo = np.minimum(j, k[None, :])
        hi = np.maximum(j, k[None, :])
        # sorted triple code: i < j always; k may fall before i, between or after
        code = np.where(
            k[None, :] < i,
            (k[None, :] * m + i) * m + j,
            (i * m + lo) * m + hi,
        )
        key = diam * m3 + code
        key[:, i] = np.iinfo(np.int64).max
        key[np.arange(len(j)), j[:, 0]] = np.iinfo(np.int64).max
        out[i, i + 1:] = key.min(axis=1)
    return out


def _h1_cohomology(f: Filtration, positive: np.ndarray):
    """Pairs (edge rank, triangle key) from reducing the anti-transposed boundary matrix."""
    m = f.m
    ranks = f.edge_ranks()
    m3 = m**3
    pivot_owner = {}  # triangle key -> edge rank whose reduced column has that pivot
    columns = {}  # edge rank -> reduced column (set) or None when equal to its coboundary
    pairs = []
    oldest = _oldest_cofacets(m, ranks)
    for r in np.flatnonzero(positive)[::-1].tolist():
        i, j = f.edges[r]
        low = int(oldest[i, j])
        if low // m3 == r:
            # emergent pair: r is the youngest facet of its oldest cofacet, so no
            # younger column can contain that triangle
            pivot_owner[low] = r
            columns[r] = None
            pairs.append((r, low))
            continue
        col = set(_cofacets(i, j, m, ranks).tolist())
        while low in pivot_owner:
            other = pivot_owner[low]
            oc = columns[other]
            if oc is None:
                oi, oj = f.edges[other]
                oc = set(_cofacets(oi, oj, m, ranks).tolist())
            col ^= oc
            if not col:
                break
            low = min(col)
        if not col:
            continue
        pivot_owner[low] = r
        columns[r] = col
        pairs.append((r, low))
    return pairs, m3


def _h1_homology(f: Filtration, positive: np.ndarray):
    """Pairs (edge rank, triangle key) from the plain boundary-matrix reduction."""
    m = f.m
    ranks = f.edge_ranks()
    m3 = m**3
    i, j, k = np.array(list(combinations(range(m), 3)), dtype=np.int64).T
    e_ij, e_ik, e_jk = ranks[i, j], ranks[i, k], ranks[j, k]
    diam = np.maximum(np.maximum(e_ij, e_ik), e_jk)
    keys = diam * m3 + (i * m + j) * m + k
    order = np.argsort(keys, kind="stable")
    owner = {}
    pairs = []
    remaining = int(positive.sum())
    for t in order.tolist():
        if remaining == 0:
            break
        col = {int(e_ij[t]), int(e_ik[t]), int(e_jk[t])}
        low = max(col)
        while low in owner:
            col ^= owner[low]
            if not col:
                break
            low = max(col)
        if col:
            owner[low] = col
            pairs.append((low, int(keys[t])))
            remaining -= 1
    return pairs, m3


def diagram_h1(f: Filtration, method: str = "cohomology") -> PersistenceDiagram:
    """Degree-1 diagram; zero-length intervals are dropped.

    ``method="cohomology"`` reduces the anti-transposed boundary matrix with
    clearing and emergent pairs; ``method="homology"`` reduces the triangle
    boundary columns directly. Both return the same diagram.
    """
    if f.m < 3:
        return PersistenceDiagram(1, np.zeros((0, 2)), f.max_filtration)
    positive = ~_merge_edges(f)
    if method == "cohomology":
        raw, m3 = _h1_cohomology(f, positive)
    elif method == "homology":
        raw, m3 = _h1_homology(f, positive)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = []
    for r, key in raw:
        birth = f.values[r]
        death = f.values[key // m3]
        if death > birth:
            out.append((birth, death))
    return PersistenceDiagram(1, np.array(out, dtype=np.float64).reshape(-1, 2), f.max_filtration)


def diagram(points, order: int, convention: str = "radius", max_filtration: float | None = None) -> PersistenceDiagram:
    f = vr_filtration(points, convention, max_filtration)
    if order == 0:
        return diagram_h0(f)
    if order == 1:
        return diagram_h1(f)
    raise ValueError("only orders 0 and 1 are supported")


def truncate_essential(d: PersistenceDiagram, cap: float) -> PersistenceDiagram:
    """Move the truncation point of ``d`` to ``cap``.

    On a full Rips complex the only essential class is the one order-0
    component, which is the last pair (largest death); finite pairs stay put.
    """
    if cap < d.max_filtration:
        raise ValueError("cap below the diagram's own truncation point")
    p = d.pairs.copy()
    if d.order == 0 and len(p):
        p[-1, 1] = cap
    return PersistenceDiagram(d.order, p, float(cap))


def _linf(a, b):
    return np.maximum(np.abs(a[:, None, 0] - b[None, :, 0]), np.abs(a[:, None, 1] - b[None, :, 1]))


def bottleneck_distance(d1: PersistenceDiagram, d2: PersistenceDiagram) -> float:
    """Bottleneck distance with L-infinity ground cost and diagonal matching."""
    if d1.order != d2.order:
        raise ValueError("diagrams have different homology orders")
    a, b = d1.pairs, d2.pairs
    na, nb = len(a), len(b)
    if na + nb == 0:
        return 0.0
    # rows: points of a, then diagonal slots for b; columns: points of b, then diagonal slots for a
    n = na + nb
    cost = np.full((n, n), np.inf)
    half_a = (a[:, 1] - a[:, 0]) / 2.0
    half_b = (b[:, 1] - b[:, 0]) / 2.0
    if na and nb:
        cost[:na, :nb] = _linf(a, b)
    cost[:na, nb:][np.arange(na), np.arange(na)] = half_a
    cost[na:, :nb][np.arange(nb), np.arange(nb)] = half_b
    cost[na:, nb:] = 0.0
    cand = np.unique(cost[np.isfinite(cost)])

    def feasible(eps):
        adj = csr_matrix(cost <= eps)
        match = maximum_bipartite_matching(adj, perm_type="column")
        return bool(np.all(match >= 0))

    lo, hi = 0, len(cand) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(cand[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def write_diagrams(diagrams, path) -> None:
    diagrams = list(diagrams)
    maxf = diagrams[0].max_filtration if diagrams else 0.0
    orders = ",".join(str(d.order) for d in diagrams)
    lines = [f"# maxfilt={maxf!r}", f"# orders={orders}", "order,birth,death"]
    for d in diagrams:
        lines += [f"{d.order},{b!r},{e!r}" for b, e in d.pairs.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_diagrams(path) -> dict[int, PersistenceDiagram]:
    maxf = 0.0
    rows: dict[int, list] = {}
    for ln in Path(path).read_text().splitlines():
        if ln.startswith("#"):
            if ln.startswith("# maxfilt="):
                maxf = float(ln.split("=", 1)[1])
            elif ln.startswith("# orders="):
                for o in filter(None, ln.split("=", 1)[1].split(",")):
                    rows.setdefault(int(o), [])
            continue
        if not ln.strip() or ln.startswith("order"):
            continue
        o, b, d = ln.split(",")
        rows.setdefault(int(o), []).append((float(b), float(d)))
    return {o: PersistenceDiagram(o, np.array(p).reshape(-1, 2), maxf) for o, p in rows.items()}
