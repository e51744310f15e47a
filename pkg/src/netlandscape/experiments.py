"""Pipeline orchestration and the ER / SBM simulation harness.

A run is a list of independent work units (one per repetition, and per
scenario for SBM) whose records are reduced in unit order, so the
artifacts do not depend on how many workers computed them.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .clustering import build_affinity, k_groups, k_medoids, rand_index, spectral_cluster
from .energy import DistanceCache, permutation_test_cached
from .landscape import Landscape, build_landscape
from .lsm import Embedding, FitConfig, fit_lsm
from .netgen import Graph, even_blocks, gen_er, gen_sbm
from .persistence import CONVENTIONS, PersistenceDiagram, diagram, truncate_essential

log = logging.getLogger(__name__)

KINDS = ("er_pairwise", "sbm_multisample")
TESTS = ("k_sample", "disco_B")
CLUSTER_METHODS = ("kmedoids", "kgroups", "spectral")
TRUNCATIONS = ("common", "per_cloud")
ER_PROBABILITIES = (0.01, 0.025, 0.05, 0.1, 0.15, 0.2, 0.25)
SBM_SCENARIOS = ((2, 3, 4), (2, 3, 5), (2, 4, 5), (3, 4, 5), (2, 5, 10))


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    kind: str = "sbm_multisample"
    probabilities: tuple = ER_PROBABILITIES
    scenarios: tuple = SBM_SCENARIOS
    p_high: float = 0.8
    p_low: float = 0.1
    m: int = 10
    n_min: int = 80
    n_max: int = 120
    B: int = 999
    reps: int = 20
    seed: int = 0
    orders: tuple = (0, 1)
    convention: str = "radius"
    rho: float = 1.0
    tau: int = 7
    truncation: str = "common"
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        self.probabilities = tuple(float(p) for p in self.probabilities)
        self.scenarios = tuple(tuple(int(k) for k in s) for s in self.scenarios)
        self.orders = tuple(int(o) for o in self.orders)
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        for name in ("m", "n_min", "n_max", "B", "reps", "tau"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_min < 3 or self.n_max < self.n_min:
            raise ConfigError("need 3 <= n_min <= n_max")
        if any(not 0.0 <= p <= 1.0 for p in (*self.probabilities, self.p_high, self.p_low)):
            raise ConfigError("probabilities must lie in [0, 1]")
        if self.kind == "er_pairwise" and len(self.probabilities) < 2:
            raise ConfigError("ER grid needs at least two probabilities")
        if self.kind == "sbm_multisample":
            if not self.scenarios or any(len(s) < 2 or min(s) < 1 for s in self.scenarios):
                raise ConfigError("each SBM scenario needs two or more positive community counts")
        if not self.orders or any(o not in (0, 1) for o in self.orders):
            raise ConfigError("orders must be drawn from {0, 1}")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"unknown convention {self.convention!r}")
        if not 0.0 < self.rho <= 2.0:
            raise ConfigError("rho must lie in (0, 2]")
        if self.truncation not in TRUNCATIONS:
            raise ConfigError(f"unknown truncation {self.truncation!r}")
        if self.tau >= self.n_items():
            raise ConfigError(f"tau={self.tau} needs more than {self.n_items()} pooled networks")

    def n_groups(self) -> int:
        return 2 if self.kind == "er_pairwise" else len(self.scenarios[0])

    def n_items(self) -> int:
        if self.kind == "er_pairwise":
            return 2 * self.m
        return self.m * min(len(s) for s in self.scenarios)

    def cells(self) -> list[str]:
        if self.kind == "er_pairwise":
            return [_er_cell(self.probabilities[j], self.probabilities[i]) for i, j in _lower_pairs(len(self.probabilities))]
        return [_sbm_cell(s) for s in self.scenarios]

    # plain-text key = value form
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        sc = {}
        for f in fields(self):
            if f.name == "fit":
                continue
            v = getattr(self, f.name)
            if f.name == "scenarios":
                sc[f.name] = ", ".join("-".join(map(str, s)) for s in v)
            elif isinstance(v, tuple):
                sc[f.name] = ", ".join(repr(x) for x in v)
            else:
                sc[f.name] = repr(v) if isinstance(v, float) else str(v)
        cp["scenario"] = sc
        cp["fit"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(self.fit).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, **overrides) -> "ScenarioConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as err:
            raise ConfigError(str(err)) from err
        kw = {}
        known = {f.name: f for f in fields(cls)}
        if cp.has_section("scenario"):
            for key, raw in cp["scenario"].items():
                name = "B" if key == "b" else key
                if name not in known or name == "fit":
                    raise ConfigError(f"unknown config key {key!r}")
                kw[name] = _parse_value(name, raw)
        if cp.has_section("fit"):
            fit_fields = {f.name: f for f in fields(FitConfig)}
            fit_kw = {}
            for key, raw in cp["fit"].items():
                if key not in fit_fields:
                    raise ConfigError(f"unknown fit key {key!r}")
                fit_kw[key] = _num(raw, int if key == "max_iter" else float)
            kw["fit"] = FitConfig(**fit_kw)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**kw)
        except TypeError as err:
            raise ConfigError(str(err)) from err

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


def _num(raw, typ):
    try:
        return typ(raw.strip())
    except ValueError as err:
        raise ConfigError(f"cannot parse {raw!r}") from err


def _parse_value(name, raw):
    raw = raw.strip()
    if name == "scenarios":
        return tuple(tuple(_num(k, int) for k in s.split("-")) for s in raw.split(",") if s.strip())
    if name == "probabilities":
        return tuple(_num(p, float) for p in raw.split(",") if p.strip())
    if name == "orders":
        return tuple(_num(o, int) for o in raw.split(",") if o.strip())
    if name in ("kind", "convention", "truncation"):
        return raw
    if name in ("p_high", "p_low", "rho"):
        return _num(raw, float)
    return _num(raw, int)


def _lower_pairs(k):
    """(row, col) with row > col, row-major: the lower triangle of a k x k table."""
    return [(i, j) for i in range(k) for j in range(i)]


def _er_cell(pa, pb):
    return f"{pa!r}_{pb!r}"


def _sbm_cell(s):
    return "-".join(map(str, s))


# ---------------------------------------------------------------- pipeline


@dataclass
class PipelineResult:
    landscape: Landscape
    diagram: PersistenceDiagram
    embedding: Embedding
    degenerate: bool


def is_degenerate(g: Graph) -> bool:
    return g.num_edges in (0, g.n * (g.n - 1) // 2)


def pipeline(g: Graph, order: int, convention: str = "radius", fit_cfg: FitConfig | None = None,
             max_filtration: float | None = None) -> PipelineResult:
    """Graph -> latent embedding -> Rips diagram -> landscape.

    Empty and complete graphs still yield a landscape (from the clamped fit)
    but are flagged as degenerate.
    """
    e = fit_lsm(g, fit_cfg)
    d = diagram(e.positions, order, convention, max_filtration)
    return PipelineResult(build_landscape(d), d, e, is_degenerate(g))


@dataclass
class NetworkSummary:
    """Per-network diagrams, kept so pools can share a truncation point."""

    diagrams: dict
    degenerate: bool
    converged: bool


def summarize(g: Graph, cfg: ScenarioConfig) -> NetworkSummary:
    e = fit_lsm(g, cfg.fit)
    dg = {o: diagram(e.positions, o, cfg.convention) for o in cfg.orders}
    return NetworkSummary(dg, is_degenerate(g), e.converged)


def pooled_landscapes(diagrams, truncation: str = "common") -> list[Landscape]:
    """Landscapes of a pool; with ``common`` truncation every essential class ends at the pool maximum."""
    diagrams = list(diagrams)
    if truncation == "common" and diagrams:
        cap = max(d.max_filtration for d in diagrams)
        diagrams = [truncate_essential(d, cap) for d in diagrams]
    return [build_landscape(d) for d in diagrams]


# ---------------------------------------------------------------- work units


def _unit_seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def _draw_group(rng, m, cfg, make):
    out = []
    for _ in range(m):
        n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
        out.append(make(n, int(rng.integers(2**63 - 1))))
    return out


def _analyse_pool(cfg, cell, rep, summaries, sizes, seed, keep_distances):
    """Tests and clustering on one pool whose groups are consecutive."""
    truth = np.repeat(np.arange(len(sizes)), sizes)
    k = len(sizes)
    pvals, rands, dists = [], [], []
    for o in cfg.orders:
        ls = pooled_landscapes([s.diagrams[o] for s in summaries], cfg.truncation)
        cache = DistanceCache.from_landscapes(ls)
        for t in TESTS:
            rep_ = permutation_test_cached(cache, sizes, t, cfg.B, seed, cfg.rho, order=o)
            pvals.append(dict(cell=cell, rep=rep, order=o, test=t,
                              statistic=rep_.statistic, p_value=rep_.p_value))
        parts = {
            "kmedoids": k_medoids(cache, k, seed),
            "kgroups": k_groups(cache, k, cfg.rho, seed),
            "spectral": spectral_cluster(build_affinity(cache, cfg.tau), k, seed),
        }
        for name in CLUSTER_METHODS:
            rands.append(dict(cell=cell, rep=rep, order=o, method=name,
                              rand=rand_index(parts[name].assignments, truth)))
        if keep_distances:
            dists.append((cell, o, truth, cache.matrix))
    return pvals, rands, dists


def _fit_record(cell, rep, summaries):
    return dict(cell=cell, rep=rep, networks=len(summaries),
                degenerate=sum(s.degenerate for s in summaries),
                unconverged=sum(not s.converged for s in summaries))


def _sbm_unit(args):
    cfg, si, rep = args
    scen = cfg.scenarios[si]
    cell = _sbm_cell(scen)
    rng = np.random.default_rng([cfg.seed, 1, si, rep])
    summaries = []
    for k0 in scen:
        graphs = _draw_group(rng, cfg.m, cfg,
                             lambda n, s: gen_sbm(even_blocks(n, k0), cfg.p_high, cfg.p_low, s))
        summaries += [summarize(g, cfg) for g in graphs]
    pv, rd, ds = _analyse_pool(cfg, cell, rep, summaries, [cfg.m] * len(scen),
                               _unit_seed(cfg.seed, 1, si, rep), rep == 0)
    return pv, rd, [_fit_record(cell, rep, summaries)], ds


def _er_unit(args):
    cfg, rep = args
    rng = np.random.default_rng([cfg.seed, 0, rep])
    # one sample per probability, shared by every cell of this repetition
    groups = []
    for p in cfg.probabilities:
        graphs = _draw_group(rng, cfg.m, cfg, lambda n, s: gen_er(n, p, s))
        groups.append([summarize(g, cfg) for g in graphs])
    pv, rd, fits, ds = [], [], [], []
    for c, (i, j) in enumerate(_lower_pairs(len(cfg.probabilities))):
        cell = _er_cell(cfg.probabilities[j], cfg.probabilities[i])
        pool = groups[j] + groups[i]
        a, b, d = _analyse_pool(cfg, cell, rep, pool, [cfg.m, cfg.m],
                                _unit_seed(cfg.seed, 0, rep, c), rep == 0)
        pv += a
        rd += b
        ds += d
    for gi, p in enumerate(cfg.probabilities):
        fits.append(_fit_record(repr(p), rep, groups[gi]))
    return pv, rd, fits, ds


def _map(fn, units, jobs):
    if jobs and jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, units))
    return [fn(u) for u in units]


# ---------------------------------------------------------------- artifacts


@dataclass
class RunArtifacts:
    kind: str
    config: ScenarioConfig
    pvalues: list
    rand: list
    fits: list
    distances: list = field(default_factory=list, repr=False)

    def pvalue_means(self) -> list:
        return _means(self.pvalues, ("cell", "order", "test"), "p_value", self.config.cells())

    def rand_means(self) -> list:
        return _means(self.rand, ("cell", "order", "method"), "rand", self.config.cells())

    def mean(self, table: str, **key) -> float:
        rows = self.pvalue_means() if table == "pvalues" else self.rand_means()
        hits = [r for r in rows if all(r[k] == v for k, v in key.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} aggregate rows match {key}")
        return hits[0]["mean"]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "provenance": {
                "config_hash": self.config.config_hash(),
                "seed": self.config.seed,
                "version": __version__,
            },
            "cells": self.config.cells(),
            "pvalues": self.pvalues,
            "rand": self.rand,
            "fits": self.fits,
            "summary": {"pvalues": self.pvalue_means(), "rand": self.rand_means()},
        }


def _means(rows, keys, value, cell_order):
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r[value])
    rank = {c: i for i, c in enumerate(cell_order)}
    out = []
    for key in sorted(groups, key=lambda t: (rank.get(t[0], len(rank)), *t[1:])):
        vals = groups[key]
        out.append({**dict(zip(keys, key)), "mean": float(np.mean(vals)), "reps": len(vals)})
    return out


ARTIFACT_SCHEMA = {
    "type": "object",
    "required": ["kind", "provenance", "cells", "pvalues", "rand", "fits", "summary"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "provenance": {
            "type": "object",
            "required": ["config_hash", "seed", "version"],
            "properties": {
                "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                "seed": {"type": "integer"},
                "version": {"type": "string"},
            },
        },
        "cells": {"type": "array", "items": {"type": "string"}},
        "pvalues": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["cell", "rep", "order", "test", "statistic", "p_value"],
                "properties": {
                    "test": {"enum": list(TESTS)},
                    "order": {"enum": [0, 1]},
                    "p_value": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "statistic": {"type": "number"},
                },
            },
        },
        "rand": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["cell", "rep", "order", "method", "rand"],
                "properties": {
                    "method": {"enum": list(CLUSTER_METHODS)},
                    "rand": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "fits": {"type": "array"},
        "summary": {
            "type": "object",
            "required": ["pvalues", "rand"],
        },
    },
}


def validate_artifacts(doc: dict) -> None:
    jsonschema.validate(doc, ARTIFACT_SCHEMA)


def run_sbm_scenarios(cfg: ScenarioConfig, jobs: int = 1) -> RunArtifacts:
    if cfg.kind != "sbm_multisample":
        raise ConfigError("config is not an SBM scenario")
    units = [(cfg, si, r) for si in range(len(cfg.scenarios)) for r in range(cfg.reps)]
    return _assemble(cfg, _map(_sbm_unit, units, jobs))


def run_er_pairwise(cfg: ScenarioConfig, jobs: int = 1) -> RunArtifacts:
    if cfg.kind != "er_pairwise":
        raise ConfigError("config is not an ER scenario")
    units = [(cfg, r) for r in range(cfg.reps)]
    return _assemble(cfg, _map(_er_unit, units, jobs))


def run_experiment(cfg: ScenarioConfig, jobs: int = 1) -> RunArtifacts:
    return (run_er_pairwise if cfg.kind == "er_pairwise" else run_sbm_scenarios)(cfg, jobs)


def _assemble(cfg, results):
    pv, rd, fits, ds = [], [], [], []
    for a, b, c, d in results:
        pv += a
        rd += b
        fits += c
        ds += d
    return RunArtifacts(cfg.kind, cfg, pv, rd, fits, ds)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(r[h]) if isinstance(r[h], float) else r[h] for h in header])


def er_matrix(art: RunArtifacts, table: str, order: int, name: str) -> np.ndarray:
    """Lower-triangular table of means over the probability grid; NaN elsewhere."""
    probs = art.config.probabilities
    out = np.full((len(probs), len(probs)), np.nan)
    for i, j in _lower_pairs(len(probs)):
        key = {"cell": _er_cell(probs[j], probs[i]), "order": order}
        key["test" if table == "pvalues" else "method"] = name
        out[i, j] = art.mean(table, **key)
    return out


def write_artifacts(art: RunArtifacts, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    doc = art.to_dict()
    validate_artifacts(doc)
    (out / "config.ini").write_text(art.config.to_ini())
    (out / "artifacts.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    _write_rows(out / "pvalues.csv", ["cell", "rep", "order", "test", "statistic", "p_value"], art.pvalues)
    _write_rows(out / "rand.csv", ["cell", "rep", "order", "method", "rand"], art.rand)
    _write_rows(out / "fits.csv", ["cell", "rep", "networks", "degenerate", "unconverged"], art.fits)
    _write_rows(out / "summary_pvalues.csv", ["cell", "order", "test", "mean", "reps"], art.pvalue_means())
    _write_rows(out / "summary_rand.csv", ["cell", "order", "method", "mean", "reps"], art.rand_means())
    if art.kind == "er_pairwise":
        probs = [repr(p) for p in art.config.probabilities]
        for o in art.config.orders:
            for table, names in (("pvalues", TESTS), ("rand", CLUSTER_METHODS)):
                for name in names:
                    mat = er_matrix(art, table, o, name)
                    with open(out / f"matrix_{table}_order{o}_{name}.csv", "w", newline="") as fh:
                        w = csv.writer(fh, lineterminator="\n")
                        w.writerow(["p", *probs])
                        for p, row in zip(probs, mat.tolist()):
                            w.writerow([p, *("" if np.isnan(v) else repr(v) for v in row)])
    if art.distances:
        ddir = out / "distances"
        ddir.mkdir(exist_ok=True)
        for cell, o, labels, mat in art.distances:
            with open(ddir / f"{cell}_order{o}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["group", *range(len(labels))])
                for g, row in zip(labels.tolist(), mat.tolist()):
                    w.writerow([g, *map(repr, row)])
    return out
