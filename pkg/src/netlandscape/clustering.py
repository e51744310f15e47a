"""Clustering of landscape populations from their pooled distance matrix."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.cluster import KMeans

from .energy import DistanceCache

log = logging.getLogger(__name__)

DEFAULT_TAU = 7


@dataclass
class Partition:
    assignments: np.ndarray
    k: int
    objective: float
    medoids: list | None = None
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        counts = np.bincount(self.assignments, minlength=self.k)
        if len(counts) != self.k or np.any(counts == 0):
            raise ValueError("every cluster must be non-empty")


def _check_k(k, n):
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")


def _medoid_cost(d2, medoids):
    return float(d2[:, medoids].min(axis=1).sum())


def k_medoids(d: DistanceCache, k: int, seed=0, max_iter: int = 1000) -> Partition:
    """PAM with squared distances: greedy best swap until nothing improves."""
    n = d.n
    _check_k(k, n)
    d2 = d.matrix**2
    rng = np.random.default_rng(seed)
    medoids = sorted(rng.choice(n, size=k, replace=False).tolist())
    cost = _medoid_cost(d2, medoids)
    history = [cost]
    for _ in range(max_iter):
        best = (cost, None, None)
        is_med = np.zeros(n, dtype=bool)
        is_med[medoids] = True
        for s in range(k):
            rest = medoids[:s] + medoids[s + 1 :]
            base = d2[:, rest].min(axis=1) if rest else np.full(n, np.inf)
            trial = np.minimum(base[:, None], d2).sum(axis=0)
            trial[is_med] = np.inf
            h = int(np.argmin(trial))
            if trial[h] < best[0]:
                best = (float(trial[h]), s, h)
        # strict improvement beyond rounding keeps the loop finite
        if best[1] is None or best[0] >= cost - 1e-12 * max(cost, 1.0):
            break
        medoids[best[1]] = best[2]
        medoids.sort()
        cost = _medoid_cost(d2, medoids)
        history.append(cost)
    labels = np.argmin(d2[:, medoids], axis=1)
    labels[medoids] = np.arange(k)
    return Partition(labels, k, cost, medoids=list(medoids), history=history)


def within_dispersion(d: DistanceCache, labels, rho: float = 1.0) -> float:
    """``sum_i |S_i|/2 * d_rho(S_i, S_i)``."""
    labels = np.asarray(labels)
    dr = d.matrix**rho
    total = 0.0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        total += dr[np.ix_(idx, idx)].sum() / (2.0 * len(idx))
    return float(total)


def k_groups(d: DistanceCache, k: int, rho: float = 1.0, seed=0, init: str = "kmedoids",
             max_iter: int = 10000) -> Partition:
    """Energy k-groups by single-point moves that most decrease the within dispersion."""
    n = d.n
    _check_k(k, n)
    if not 0.0 < rho <= 2.0:
        raise ValueError(f"rho={rho} outside (0, 2]")
    if init == "kmedoids":
        labels = k_medoids(d, k, seed).assignments.copy()
    elif init == "random":
        rng = np.random.default_rng(seed)
        labels = rng.permutation(np.arange(n) % k)
    else:
        raise ValueError(f"unknown init {init!r}")
    dr = d.matrix**rho
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    w = within_dispersion(d, labels, rho)
    history = [w]
    rows = np.arange(n)
    for _ in range(max_iter):
        s = dr @ onehot  # s[x, c] = sum of distances from x to cluster c
        sizes = onehot.sum(axis=0)
        q = np.einsum("ic,ic->c", onehot, s)  # q[c] = sum over pairs inside c
        a = labels
        na, qa, sa = sizes[a], q[a], s[rows, a]
        with np.errstate(divide="ignore", invalid="ignore"):
            leave = np.where(na > 1, (qa - 2.0 * sa) / (2.0 * (na - 1)), 0.0) - qa / (2.0 * na)
        join = (q[None, :] + 2.0 * s) / (2.0 * (sizes[None, :] + 1)) - q[None, :] / (2.0 * sizes[None, :])
        delta = leave[:, None] + join
        delta[rows, a] = np.inf
        delta[na <= 1, :] = np.inf  # never empty a cluster
        flat = int(np.argmin(delta))
        x, c = divmod(flat, k)
        if not delta[x, c] < -1e-12 * max(w, 1.0):
            break
        onehot[x, labels[x]] = 0.0
        onehot[x, c] = 1.0
        labels[x] = c
        w = within_dispersion(d, labels, rho)
        history.append(w)
    return Partition(labels, k, w, history=history)


@dataclass
class Affinity:
    matrix: np.ndarray
    tau: int
    sigma: np.ndarray


def build_affinity(d: DistanceCache, tau: int = DEFAULT_TAU) -> Affinity:
    """Self-tuning Gaussian affinity with bandwidth = distance to the tau-th neighbour."""
    n = d.n
    if not 1 <= tau < n:
        raise ValueError(f"tau={tau} must lie in [1, {n - 1}]")
    dm = d.matrix
    others = np.sort(dm + np.diag(np.full(n, np.inf)), axis=1)
    sigma = others[:, tau - 1].copy()
    if np.any(sigma <= 0):
        floor = np.finfo(float).eps * (dm.max() if dm.max() > 0 else 1.0)
        log.warning("%d zero bandwidths floored at %g", int(np.sum(sigma <= 0)), floor)
        sigma = np.maximum(sigma, floor)
    a = np.exp(-(dm**2) / np.outer(sigma, sigma))
    np.fill_diagonal(a, 1.0)
    return Affinity(a, tau, sigma)


def normalized_laplacian(a: Affinity) -> np.ndarray:
    deg = a.matrix.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    lap = np.eye(len(deg)) - inv[:, None] * a.matrix * inv[None, :]
    return 0.5 * (lap + lap.T)


def spectral_cluster(a: Affinity, k: int, seed=0) -> Partition:
    n = len(a.matrix)
    _check_k(k, n)
    lap = normalized_laplacian(a)
    try:
        vals, vecs = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as err:
        raise RuntimeError("eigendecomposition of the Laplacian failed") from err
    emb = vecs[:, :k].copy()
    for c in range(k):
        j = np.flatnonzero(np.abs(emb[:, c]) > 1e-12)
        if len(j) and emb[j[0], c] < 0:
            emb[:, c] = -emb[:, c]
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=100, random_state=seed)
    labels = km.fit_predict(emb)
    # relabel by first appearance so equal partitions print identically
    _, first = np.unique(labels, return_index=True)
    remap = np.empty(k, dtype=np.int64)
    remap[np.argsort(np.argsort(first))] = np.arange(k)
    return Partition(remap[labels], k, float(km.inertia_), history=vals[:k].tolist())


def rand_index(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("labelings have different lengths")
    n = len(a)
    if n < 2:
        return 1.0
    iu, ju = np.triu_indices(n, k=1)
    agree = (a[iu] == a[ju]) == (b[iu] == b[ju])
    return float(agree.mean())


def write_partition(p: Partition, path, meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "cluster"])
        for i, c in enumerate(p.assignments.tolist()):
            w.writerow([i, c])
    info = {"k": p.k, "objective": p.objective}
    if p.medoids is not None:
        info["medoids"] = [int(m) for m in p.medoids]
    info.update(meta or {})
    Path(path).with_suffix(".json").write_text(json.dumps(info, sort_keys=True) + "\n")
