"""Run a simulation study from a config file and print the mean tables.

    python scripts/run_experiment.py configs/sbm_desk.ini --out runs/sbm --jobs 4 --plots
"""
import argparse
import logging
import time
from pathlib import Path

from netlandscape.experiments import ScenarioConfig, run_experiment, write_artifacts
from netlandscape.plots import emit_plots


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--reps", type=int, default=None, help="override the config")
    ap.add_argument("--plots", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ScenarioConfig.from_ini(args.config.read_text(), reps=args.reps)
    t0 = time.perf_counter()
    art = run_experiment(cfg, args.jobs)
    out = write_artifacts(art, args.out)
    if args.plots:
        emit_plots(out)
    logging.info("%s finished in %.0fs -> %s", cfg.kind, time.perf_counter() - t0, out)
    for row in art.pvalue_means():
        print(f"{row['cell']:>12}  order {row['order']}  {row['test']:<9} mean p    {row['mean']:.4f}")
    for row in art.rand_means():
        print(f"{row['cell']:>12}  order {row['order']}  {row['method']:<9} mean Rand {row['mean']:.4f}")


if __name__ == "__main__":
    main()
