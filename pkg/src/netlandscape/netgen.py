"""Undirected simple graphs, ER/SBM generators and graph-level descriptors."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected binary graph on nodes ``0..n-1``.

    ``edges`` is an ``(E, 2)`` integer array with ``i < j`` on every row,
    sorted lexicographically and free of duplicates.
    """

    n: int
    edges: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        object.__setattr__(self, "edges", e)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1
            a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(map(tuple, self.edges.tolist()))
        return g

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


def _check_prob(p, name="p"):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name}={p} is not a probability")


def _bernoulli_pairs(n, prob_fn, seed):
    # One uniform per pair in row-major upper-triangle order; this keeps
    # gen_sbm with a single block draw-for-draw identical to gen_er.
    iu, ju = np.triu_indices(n, k=1)
    u = np.random.default_rng(seed).random(len(iu))
    keep = u < prob_fn(iu, ju)
    return Graph(n, np.column_stack([iu[keep], ju[keep]]))


def gen_er(n: int, p: float, seed=None) -> Graph:
    """Erdos-Renyi G(n, p)."""
    if n < 1:
        raise ValueError("n must be positive")
    _check_prob(p)
    return _bernoulli_pairs(n, lambda i, j: p, seed)


def gen_sbm(block_sizes, p_high: float, p_low: float, seed=None) -> Graph:
    """Stochastic block model with consecutive node blocks."""
    sizes = [int(s) for s in block_sizes]
    if not sizes:
        raise ValueError("block_sizes is empty")
    if any(s < 1 for s in sizes):
        raise ValueError("block sizes must be positive")
    _check_prob(p_high, "p_high")
    _check_prob(p_low, "p_low")
    membership = np.repeat(np.arange(len(sizes)), sizes)
    return _bernoulli_pairs(
        sum(sizes),
        lambda i, j: np.where(membership[i] == membership[j], p_high, p_low),
        seed,
    )


def even_blocks(n: int, k: int) -> list[int]:
    """Split ``n`` nodes into ``k`` blocks as evenly as possible, remainder to the first blocks."""
    if k < 1 or n < k:
        raise ValueError(f"cannot split {n} nodes into {k} blocks")
    q, r = divmod(n, k)
    return [q + 1] * r + [q] * (k - r)


def shortest_paths(g: Graph) -> np.ndarray:
    """BFS hop distances; unreachable pairs are ``inf``."""
    a = csr_matrix(g.adjacency(), dtype=np.float64)
    return shortest_path(a, directed=False, unweighted=True)


@dataclass
class DescriptorRecord:
    average_degree: float
    avg_shortest_path: float
    betweenness: float
    closeness: float
    degree_centrality: float
    density: float
    diameter: float
    modularity: float
    transitivity: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[float]:
        return [getattr(self, name) for name in self.header()]


def descriptors(g: Graph) -> DescriptorRecord:
    """Graph-level summaries; path-based ones use the largest connected component."""
    if g.n < 2:
        raise ValueError("descriptors need at least two nodes")
    n, m = g.n, g.num_edges
    density = m / (n * (n - 1) / 2)
    if m == 0:
        return DescriptorRecord(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    G = g.to_networkx()
    dist = shortest_paths(g)
    lcc = max(nx.connected_components(G), key=lambda c: (len(c), -min(c)))
    idx = np.array(sorted(lcc))
    sub = dist[np.ix_(idx, idx)]
    k = len(idx)
    asd = float(sub.sum() / (k * (k - 1))) if k > 1 else 0.0
    diameter = float(sub.max()) if k > 1 else 0.0

    communities = nx.community.greedy_modularity_communities(G)
    return DescriptorRecord(
        average_degree=2.0 * m / n,
        avg_shortest_path=asd,
        betweenness=float(np.mean(list(nx.betweenness_centrality(G).values()))),
        closeness=float(np.mean(list(nx.closeness_centrality(G).values()))),
        degree_centrality=float(np.mean(list(nx.degree_centrality(G).values()))),
        density=density,
        diameter=diameter,
        modularity=float(nx.community.modularity(G, communities)),
        transitivity=float(nx.transitivity(G)),
    )


def write_graph(g: Graph, path) -> None:
    lines = [f"n={g.n}"] + [f"{i} {j}" for i, j in g.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_graph(path) -> Graph:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("n="):
        raise ValueError(f"{path}: first line must be n=<count>")
    n = int(text[0][2:])
    edges = [tuple(map(int, ln.split())) for ln in text[1:] if ln.strip()]
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


def write_descriptors(records, path, names=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph"] + DescriptorRecord.header())
        for k, rec in enumerate(records):
            label = names[k] if names is not None else k
            w.writerow([label] + [repr(float(v)) for v in rec.row()])
