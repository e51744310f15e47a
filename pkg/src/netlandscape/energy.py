"""Energy statistics on landscape samples and their permutation tests.

All statistics are computed from a pooled distance matrix, so a
permutation only relabels rows; distances are never recomputed.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .landscape import distance_matrix

METHODS = ("two_sample", "k_sample", "disco_B")

# Replicates within this relative distance of the observed statistic count as
# ties; they are exact ties in real arithmetic that rounding may split.
TIE_RTOL = 1e-9


@dataclass
class Sample:
    items: list
    label: str = ""

    def __post_init__(self):
        if not self.items:
            raise ValueError("a sample needs at least one landscape")
        if len({l.order for l in self.items}) > 1:
            raise ValueError("sample mixes homology orders")


class DistanceCache:
    """Immutable pooled distance matrix."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(m) != 0) or np.any(m < 0):
            raise ValueError("distance matrix needs zero diagonal and nonnegative entries")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def from_landscapes(cls, landscapes) -> "DistanceCache":
        return cls(distance_matrix(landscapes))

    @classmethod
    def from_points(cls, x) -> "DistanceCache":
        """Euclidean distances between rows of ``x`` (1-D input is treated as scalars)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        diff = x[:, None, :] - x[None, :, :]
        m = np.sqrt(np.sum(diff * diff, axis=-1))
        return cls(0.5 * (m + m.T))

    @property
    def n(self) -> int:
        return len(self.matrix)

    def scaled(self, c: float) -> "DistanceCache":
        return DistanceCache(self.matrix * c)


def _labels_from_groups(n, groups):
    labels = np.full(n, -1, dtype=np.int64)
    for g, idx in enumerate(groups):
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx) == 0:
            raise ValueError("empty group")
        if np.any(labels[idx] >= 0) or len(np.unique(idx)) != len(idx):
            raise ValueError("groups overlap")
        labels[idx] = g
    return labels


def _block_sums(dmat, labels, k):
    onehot = np.zeros((len(labels), k))
    used = labels >= 0
    onehot[np.flatnonzero(used), labels[used]] = 1.0
    return onehot.T @ dmat @ onehot, onehot.sum(axis=0)


def _energy_terms(s, sizes):
    """``2 S_ij/(n_i n_j) - S_ii/n_i^2 - S_jj/n_j^2`` for every i < j."""
    k = len(sizes)
    iu, ju = np.triu_indices(k, k=1)
    within = np.diag(s) / sizes**2
    e = 2.0 * s[iu, ju] / (sizes[iu] * sizes[ju]) - within[iu] - within[ju]
    return e, sizes[iu], sizes[ju]


def _k_sample_from_labels(dmat, labels, k):
    s, sizes = _block_sums(dmat, labels, k)
    e, ni, nj = _energy_terms(s, sizes)
    return float(np.sum(ni * nj / (ni + nj) * e))


def _disco_from_labels(dmat_rho, labels, k):
    s, sizes = _block_sums(dmat_rho, labels, k)
    n = sizes.sum()
    total = n / 2.0 * (s.sum() / n**2)
    within = float(np.sum(sizes / 2.0 * np.diag(s) / sizes**2))
    e, ni, nj = _energy_terms(s, sizes)
    between = float(np.sum(ni * nj / (2.0 * n) * e))
    return float(total), within, between


def two_sample_statistic(d: DistanceCache, idx1, idx2) -> float:
    labels = _labels_from_groups(d.n, [idx1, idx2])
    return _k_sample_from_labels(d.matrix, labels, 2)


def k_sample_statistic(d: DistanceCache, groups) -> float:
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    labels = _labels_from_groups(d.n, groups)
    return _k_sample_from_labels(d.matrix, labels, len(groups))


def _check_rho(rho):
    if not 0.0 < rho <= 2.0:
        raise ValueError(f"rho={rho} outside (0, 2]")


def disco_decomposition(d: DistanceCache, groups, rho: float = 1.0):
    """Return ``(T_rho, W_rho, B_rho)`` over the pooled groups."""
    _check_rho(rho)
    labels = _labels_from_groups(d.n, groups)
    pool = labels >= 0
    sub = d.matrix[np.ix_(pool, pool)] ** rho
    return _disco_from_labels(sub, labels[pool], len(groups))


@dataclass
class TestReport:
    __test__ = False

    method: str
    statistic: float
    replicates: np.ndarray = field(repr=False)
    p_value: float
    B: int
    seed: int
    group_sizes: list
    order: int | None = None
    rho: float | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("replicates")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def write(self, path, replicates_path=None) -> None:
        Path(path).write_text(self.to_json() + "\n")
        if replicates_path is not None:
            with open(replicates_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["b", "statistic"])
                for b, v in enumerate(self.replicates.tolist(), start=1):
                    w.writerow([b, repr(v)])


def permutation_pvalue(statistic: float, replicates) -> float:
    """``(#{T_b >= T} + 1) / (B + 1)``, with near-ties counted as ties."""
    reps = np.asarray(replicates, dtype=np.float64)
    thresh = statistic - TIE_RTOL * abs(statistic)
    return (int(np.count_nonzero(reps >= thresh)) + 1) / (len(reps) + 1)


def replicate_permutation(seed: int, b: int, n: int) -> np.ndarray:
    """The b-th permutation of ``range(n)``; its own stream keyed by (seed, b)."""
    return np.random.default_rng([seed, b]).permutation(n)


def permutation_test_cached(
    d: DistanceCache,
    group_sizes,
    kind: str = "k_sample",
    B: int = 999,
    seed: int = 0,
    rho: float = 1.0,
    order: int | None = None,
) -> TestReport:
    """Permutation test on a pooled cache whose rows are grouped consecutively."""
    if B < 1:
        raise ValueError("B must be at least 1")
    if kind not in METHODS:
        raise ValueError(f"unknown statistic {kind!r}")
    sizes = [int(s) for s in group_sizes]
    if sum(sizes) != d.n or any(s < 1 for s in sizes):
        raise ValueError("group sizes do not partition the pool")
    k = len(sizes)
    if k < 2:
        raise ValueError("need at least two groups")
    if kind == "two_sample" and k != 2:
        raise ValueError("two_sample needs exactly two groups")
    labels = np.repeat(np.arange(k), sizes)

    if kind == "disco_B":
        _check_rho(rho)
        dm = d.matrix**rho

        def stat(lab):
            return _disco_from_labels(dm, lab, k)[2]
    else:
        dm = d.matrix

        def stat(lab):
            return _k_sample_from_labels(dm, lab, k)

    observed = stat(labels)
    reps = np.empty(B)
    for b in range(B):
        perm = replicate_permutation(seed, b, d.n)
        reps[b] = stat(labels[perm])
    return TestReport(
        method=kind,
        statistic=observed,
        replicates=reps,
        p_value=permutation_pvalue(observed, reps),
        B=B,
        seed=seed,
        group_sizes=sizes,
        order=order,
        rho=rho if kind == "disco_B" else None,
    )


def permutation_test(samples, kind="k_sample", B=999, seed=0, rho=1.0) -> TestReport:
    """Pool the samples' landscapes, cache their distances and run the test."""
    samples = list(samples)
    items = [l for s in samples for l in s.items]
    orders = {l.order for l in items}
    if len(orders) != 1:
        raise ValueError("samples mix homology orders")
    cache = DistanceCache.from_landscapes(items)
    return permutation_test_cached(
        cache, [len(s.items) for s in samples], kind, B, seed, rho, order=orders.pop()
    )
