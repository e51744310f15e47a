"""Command line interface.

Exit codes: 0 on success, 2 on a configuration or input error, 3 when a
numerical routine fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import DEFAULT_TAU, build_affinity, k_groups, k_medoids, spectral_cluster, write_partition
from .energy import METHODS, DistanceCache, permutation_test_cached
from .experiments import ConfigError, ScenarioConfig, pooled_landscapes, run_experiment, write_artifacts
from .landscape import read_landscape, write_landscape
from .lsm import FitConfig, fit_lsm, read_embedding, write_embedding
from .netgen import descriptors, even_blocks, gen_er, gen_sbm, read_graph, write_descriptors, write_graph
from .persistence import CONVENTIONS, diagram, read_diagrams, write_diagrams
from .plots import emit_plots, landscape_svg

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("netlandscape")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    g.add_argument("--order", type=int, choices=(0, 1), default=None, help="homology order")
    g.add_argument("--convention", choices=CONVENTIONS, default=None, help="Rips filtration convention")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--b", type=int, default=None, help="number of permutations")
    g.add_argument("--rho", type=float, default=None, help="DISCO / k-groups exponent in (0, 2]")
    g.add_argument("--tau", type=int, default=None, help="neighbour index of the self-tuning bandwidth")
    g.add_argument("--jobs", type=int, default=1, help="worker processes")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="netlandscape", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="simulate ER or SBM graphs")
    p.add_argument("--model", choices=("er", "sbm"), default="er")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--n", type=int, default=None, help="fixed node count; otherwise uniform on [n-min, n-max]")
    p.add_argument("--n-min", type=int, default=80)
    p.add_argument("--n-max", type=int, default=120)
    p.add_argument("--p", type=float, default=0.1, help="ER edge probability")
    p.add_argument("--communities", type=int, default=2)
    p.add_argument("--p-high", type=float, default=0.8)
    p.add_argument("--p-low", type=float, default=0.1)

    p = sub.add_parser("fit", parents=[common], help="fit the latent space model")
    p.add_argument("graphs", nargs="+", type=Path)
    p.add_argument("--max-iter", type=int, default=FitConfig.max_iter)

    p = sub.add_parser("persistence", parents=[common], help="Rips persistence diagrams of embeddings")
    p.add_argument("embeddings", nargs="+", type=Path)

    p = sub.add_parser("landscape", parents=[common], help="persistence landscapes of diagram files")
    p.add_argument("diagrams", nargs="+", type=Path)
    p.add_argument("--truncation", choices=("common", "per_cloud"), default="per_cloud",
                   help="common: all essential classes end at the largest truncation point of the inputs")

    p = sub.add_parser("test", parents=[common], help="permutation test between groups of landscapes")
    p.add_argument("--group", action="append", nargs="+", type=Path, required=True,
                   help="landscape files of one group (repeat per group)")
    p.add_argument("--method", choices=METHODS, default="k_sample")

    p = sub.add_parser("cluster", parents=[common], help="cluster landscapes")
    p.add_argument("landscapes", nargs="+", type=Path)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=("kmedoids", "kgroups", "spectral"), default="kmedoids")

    p = sub.add_parser("experiment", parents=[common], help="run a simulation study")
    p.add_argument("kind", choices=("er", "sbm"))
    p.add_argument("--config", type=Path, default=None, help="key = value config file")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--plots", action="store_true", help="also write SVG figures")

    p = sub.add_parser("plot", parents=[common], help="SVG figures from artifacts or landscape files")
    p.add_argument("inputs", nargs="+", type=Path, help="experiment output directories or landscape files")
    return ap


def _or(v, default):
    return default if v is None else v


def _cmd_generate(a):
    rng = np.random.default_rng(_or(a.seed, 0))
    a.out.mkdir(parents=True, exist_ok=True)
    recs, names = [], []
    for c in range(a.count):
        n = a.n if a.n is not None else int(rng.integers(a.n_min, a.n_max + 1))
        s = int(rng.integers(2**63 - 1))
        g = gen_er(n, a.p, s) if a.model == "er" else gen_sbm(even_blocks(n, a.communities), a.p_high, a.p_low, s)
        name = f"graph_{c:03d}"
        write_graph(g, a.out / f"{name}.txt")
        if g.n >= 2:
            recs.append(descriptors(g))
            names.append(name)
    write_descriptors(recs, a.out / "descriptors.csv", names)


def _cmd_fit(a):
    a.out.mkdir(parents=True, exist_ok=True)
    cfg = FitConfig(max_iter=a.max_iter)
    for path in a.graphs:
        e = fit_lsm(read_graph(path), cfg)
        if not e.converged:
            log.info("%s: stopped with gradient norm %.3g", path, e.final_grad_norm)
        write_embedding(e, a.out / f"{path.stem}.embedding.csv")


def _cmd_persistence(a):
    a.out.mkdir(parents=True, exist_ok=True)
    orders = (a.order,) if a.order is not None else (0, 1)
    for path in a.embeddings:
        pos = read_embedding(path).positions
        dg = [diagram(pos, o, _or(a.convention, "radius")) for o in orders]
        stem = path.name.split(".")[0]
        write_diagrams(dg, a.out / f"{stem}.diagrams.csv")


def _cmd_landscape(a):
    a.out.mkdir(parents=True, exist_ok=True)
    order = _or(a.order, 0)
    dgs = []
    for path in a.diagrams:
        found = read_diagrams(path)
        if order not in found:
            raise ConfigError(f"{path} has no order-{order} diagram")
        dgs.append(found[order])
    for path, l in zip(a.diagrams, pooled_landscapes(dgs, a.truncation)):
        stem = path.name.split(".")[0]
        write_landscape(l, a.out / f"{stem}.landscape{order}.csv")


def _read_group(paths):
    return [read_landscape(p) for p in paths]


def _cmd_test(a):
    groups = [_read_group(g) for g in a.group]
    items = [l for g in groups for l in g]
    if len({l.order for l in items}) != 1:
        raise ConfigError("landscapes mix homology orders")
    cache = DistanceCache.from_landscapes(items)
    rep = permutation_test_cached(cache, [len(g) for g in groups], a.method, _or(a.b, 999),
                                  _or(a.seed, 0), _or(a.rho, 1.0), order=items[0].order)
    a.out.mkdir(parents=True, exist_ok=True)
    rep.write(a.out / "test.json", a.out / "replicates.csv")
    print(f"{rep.method}: statistic={rep.statistic:.6g} p={rep.p_value:.6g}")


def _cmd_cluster(a):
    ls = _read_group(a.landscapes)
    cache = DistanceCache.from_landscapes(ls)
    seed, rho, tau = _or(a.seed, 0), _or(a.rho, 1.0), _or(a.tau, DEFAULT_TAU)
    if a.method == "kmedoids":
        part = k_medoids(cache, a.k, seed)
    elif a.method == "kgroups":
        part = k_groups(cache, a.k, rho, seed)
    else:
        part = spectral_cluster(build_affinity(cache, tau), a.k, seed)
    a.out.mkdir(parents=True, exist_ok=True)
    meta = {"method": a.method, "seed": seed, "rho": rho, "tau": tau,
            "items": [str(p) for p in a.landscapes]}
    write_partition(part, a.out / "partition.csv", meta)
    print(" ".join(map(str, part.assignments.tolist())))


def _cmd_experiment(a):
    kind = "er_pairwise" if a.kind == "er" else "sbm_multisample"
    text = a.config.read_text() if a.config is not None else ""
    overrides = dict(seed=a.seed, B=a.b, rho=a.rho, tau=a.tau, convention=a.convention, m=a.m, reps=a.reps,
                     orders=(a.order,) if a.order is not None else None)
    stated = re.search(r"^\s*kind\s*=\s*(\S+)", text, re.MULTILINE)
    if stated and stated.group(1) != kind:
        raise ConfigError(f"config describes {stated.group(1)}, not {kind}")
    cfg = ScenarioConfig.from_ini(text, kind=kind, **overrides)
    art = run_experiment(cfg, a.jobs)
    out = write_artifacts(art, a.out)
    if a.plots:
        emit_plots(out)
    for row in art.pvalue_means():
        print(f"{row['cell']} order {row['order']} {row['test']}: mean p = {row['mean']:.4g}")
    for row in art.rand_means():
        print(f"{row['cell']} order {row['order']} {row['method']}: mean Rand = {row['mean']:.4g}")


def _cmd_plot(a):
    written = []
    for path in a.inputs:
        if path.is_dir():
            written += emit_plots(path, a.out if a.out != Path(".") else None)
        else:
            a.out.mkdir(parents=True, exist_ok=True)
            target = a.out / f"{path.stem}.svg"
            target.write_text(landscape_svg(read_landscape(path), path.stem))
            written.append(target)
    for p in written:
        print(p)


COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "persistence": _cmd_persistence,
    "landscape": _cmd_landscape,
    "test": _cmd_test,
    "cluster": _cmd_cluster,
    "experiment": _cmd_experiment,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
