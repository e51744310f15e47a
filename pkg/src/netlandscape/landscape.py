"""Persistence landscapes stored exactly as piecewise-linear breakpoints."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit

from .persistence import PersistenceDiagram

_SLOPE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Landscape:
    """Levels ``lambda_1 >= lambda_2 >= ...``, each a pair of arrays ``(t, value)``.

    Every level is zero outside ``[t[0], t[-1]]`` and linear between
    consecutive breakpoints.
    """

    order: int
    levels: tuple

    def __len__(self):
        return len(self.levels)

    @cached_property
    def _flat(self):
        if not self.levels:
            return np.zeros(0), np.zeros(0), np.zeros(1, dtype=np.int64)
        ts = np.concatenate([t for t, _ in self.levels])
        vs = np.concatenate([v for _, v in self.levels])
        off = np.zeros(len(self.levels) + 1, dtype=np.int64)
        off[1:] = np.cumsum([len(t) for t, _ in self.levels])
        return ts, vs, off

    def scaled(self, c: float) -> "Landscape":
        """Multiply every level by ``c`` (values only)."""
        return Landscape(self.order, tuple((t.copy(), v * c) for t, v in self.levels))

    def __eq__(self, other):
        if not isinstance(other, Landscape):
            return NotImplemented
        if self.order != other.order or len(self) != len(other):
            return False
        return all(
            np.array_equal(t1, t2) and np.array_equal(v1, v2)
            for (t1, v1), (t2, v2) in zip(self.levels, other.levels)
        )


def _simplify(t, v):
    """Drop breakpoints where the slope does not change, and redundant outer zeros."""
    if len(t) <= 2:
        return t, v
    slope = np.diff(v) / np.diff(t)
    keep = np.ones(len(t), dtype=bool)
    keep[1:-1] = np.abs(np.diff(slope)) > _SLOPE_TOL
    t, v = t[keep], v[keep]
    nz = np.flatnonzero(v > 0)
    lo = max(nz[0] - 1, 0)
    hi = min(nz[-1] + 1, len(t) - 1)
    return t[lo : hi + 1], v[lo : hi + 1]


def build_landscape(d: PersistenceDiagram) -> Landscape:
    p = d.pairs
    p = p[p[:, 1] > p[:, 0]]
    if len(p) == 0:
        return Landscape(d.order, ())
    b, e = p[:, 0], p[:, 1]
    mid = (b + e) / 2.0
    # rising edge of tent i meets falling edge of tent j at (b_i + e_j) / 2
    bi, ej = b[:, None], e[None, :]
    cross = (bi + ej) / 2.0
    ok = (b[None, :] <= bi) & (ej <= e[:, None]) & (ej > bi)
    t = np.unique(np.concatenate([b, e, mid, cross[ok]]))
    vals = np.maximum(np.minimum(t[None, :] - b[:, None], e[:, None] - t[None, :]), 0.0)
    n_levels = int((vals > 0).sum(axis=0).max())
    vals = -np.sort(-vals, axis=0)
    levels = []
    for k in range(n_levels):
        lt, lv = _simplify(t, vals[k])
        levels.append((lt, lv))
    return Landscape(d.order, tuple(levels))


def evaluate(l: Landscape, k: int, t):
    """Value of level ``k`` (1-based) at ``t``; zero past the stored levels."""
    if k < 1:
        raise ValueError("levels are numbered from 1")
    if k > len(l.levels):
        return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
    lt, lv = l.levels[k - 1]
    out = np.interp(t, lt, lv, left=0.0, right=0.0)
    return float(out) if np.ndim(t) == 0 else out


@njit(cache=True)
def _value_at(ts, vs, lo, hi, p, x):
    # p: index of first breakpoint >= x within [lo, hi)
    if p == hi or p == lo:
        if p < hi and ts[p] == x:
            return vs[p]
        return 0.0
    if ts[p] == x:
        return vs[p]
    w = (x - ts[p - 1]) / (ts[p] - ts[p - 1])
    return vs[p - 1] + w * (vs[p] - vs[p - 1])


@njit(cache=True)
def _level_walk(ta, va, la, ha, tb, vb, lb, hb, want_sup):
    """Integral of (a-b)^2, or max |a-b|, over the merged breakpoints of one level."""
    ia, ib = la, lb
    acc = 0.0
    started = False
    prev_t = 0.0
    prev_d = 0.0
    inf = np.inf
    while ia < ha or ib < hb:
        xa = ta[ia] if ia < ha else inf
        xb = tb[ib] if ib < hb else inf
        x = xa if xa < xb else xb
        fa = _value_at(ta, va, la, ha, ia, x)
        fb = _value_at(tb, vb, lb, hb, ib, x)
        if xa == x:
            ia += 1
        if xb == x:
            ib += 1
        dlt = fa - fb
        if want_sup:
            if abs(dlt) > acc:
                acc = abs(dlt)
        elif started:
            h = x - prev_t
            acc += h * (prev_d * prev_d + prev_d * dlt + dlt * dlt) / 3.0
        started = True
        prev_t = x
        prev_d = dlt
    return acc


@njit(cache=True)
def _pair(ta, va, oa, tb, vb, ob, want_sup):
    na = len(oa) - 1
    nb = len(ob) - 1
    total = 0.0
    for k in range(max(na, nb)):
        la = oa[k] if k < na else 0
        ha = oa[k + 1] if k < na else 0
        lb = ob[k] if k < nb else 0
        hb = ob[k + 1] if k < nb else 0
        r = _level_walk(ta, va, la, ha, tb, vb, lb, hb, want_sup)
        if want_sup:
            if r > total:
                total = r
        else:
            total += r
    return total


def _check_orders(a, b):
    if a.order != b.order:
        raise ValueError("landscapes come from different homology orders")


def l2_distance(a: Landscape, b: Landscape) -> float:
    _check_orders(a, b)
    return float(np.sqrt(_pair(*a._flat, *b._flat, False)))


def sup_distance(a: Landscape, b: Landscape) -> float:
    _check_orders(a, b)
    return float(_pair(*a._flat, *b._flat, True))


_EMPTY = Landscape(0, ())


def lp_norm(a: Landscape, p=2) -> float:
    if p in (np.inf, "inf"):
        return float(a.levels[0][1].max()) if a.levels else 0.0
    if p == 2:
        return float(np.sqrt(_pair(*a._flat, *_EMPTY._flat, False)))
    if p == 1:
        return float(sum(np.sum(np.diff(t) * (v[:-1] + v[1:]) / 2.0) for t, v in a.levels))
    raise ValueError("p must be 1, 2 or inf")


@njit(cache=True)
def _pairwise(ts, vs, offs, lsl):
    n = len(lsl) - 1
    out = np.zeros((n, n))
    for i in range(n):
        oi = offs[lsl[i] : lsl[i + 1] + 1]
        for j in range(i + 1, n):
            oj = offs[lsl[j] : lsl[j + 1] + 1]
            s = _pair(ts, vs, oi, ts, vs, oj, False)
            out[i, j] = out[j, i] = np.sqrt(s)
    return out


def distance_matrix(landscapes) -> np.ndarray:
    """Pooled pairwise L2 distances between landscapes of a common order."""
    landscapes = list(landscapes)
    if not landscapes:
        return np.zeros((0, 0))
    if len({l.order for l in landscapes}) > 1:
        raise ValueError("mixed homology orders")
    ts, vs, offs, lsl = [], [], [0], [0]
    base = 0
    for l in landscapes:
        t, v, o = l._flat
        ts.append(t)
        vs.append(v)
        offs.extend((o[1:] + base).tolist())
        base += len(t)
        lsl.append(len(offs) - 1)
    return _pairwise(
        np.concatenate(ts) if ts else np.zeros(0),
        np.concatenate(vs) if vs else np.zeros(0),
        np.asarray(offs, dtype=np.int64),
        np.asarray(lsl, dtype=np.int64),
    )


def write_landscape(l: Landscape, path) -> None:
    lines = [f"# order={l.order}", "level,t,value"]
    for k, (t, v) in enumerate(l.levels, start=1):
        lines += [f"{k},{a!r},{b!r}" for a, b in zip(t.tolist(), v.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_landscape(path) -> Landscape:
    order = 0
    rows: dict[int, list] = {}
    for ln in Path(path).read_text().splitlines():
        if ln.startswith("#"):
            if ln.startswith("# order="):
                order = int(ln.split("=", 1)[1])
            continue
        if not ln.strip() or ln.startswith("level"):
            continue
        k, t, v = ln.split(",")
        rows.setdefault(int(k), []).append((float(t), float(v)))
    levels = []
    for k in sorted(rows):
        arr = np.array(rows[k])
        levels.append((arr[:, 0].copy(), arr[:, 1].copy()))
    return Landscape(order, tuple(levels))
