#!/usr/bin/env python3
"""Run the full evaluation grid: 8 attack models x 10 attack sizes x 7 filler
sizes, averaged over repetitions, with the KNN baseline alongside.

With the defaults this is the complete 560-cell protocol and takes a while;
trim --repetitions or pass a dataset of your own to iterate faster.
"""

import argparse
import os
import time

from shillguard import synth
from shillguard.dataset import load_movielens_csv, load_movielens_tab
from shillguard.evaluation import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", help="rating file (default: synthetic benchmark clone)")
    ap.add_argument("--format", choices=("tab", "csv"), default="tab")
    ap.add_argument("--half-star", action="store_true")
    ap.add_argument("--intent", choices=("push", "nuke"), default="nuke")
    ap.add_argument("--repetitions", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--knn", action="store_true", help="also run the KNN baseline")
    ap.add_argument("--out", default="grid_metrics.csv")
    args = ap.parse_args()

    if args.data:
        scale = (1, 10) if args.half_star else (1, 5)
        if args.format == "tab":
            ds = load_movielens_tab(args.data, scale)
        else:
            ds = load_movielens_csv(args.data, scale, half_star=args.half_star)
    else:
        ds = synth.make_ml100k_like(seed=args.seed)

    cfg = ExperimentConfig(
        intent=args.intent,
        repetitions=args.repetitions,
        master_seed=args.seed,
        knn=args.knn,
    )
    n_cells = len(cfg.attack_models) * len(cfg.attack_sizes) * len(cfg.filler_sizes)
    print(f"{n_cells} grid cells x {cfg.repetitions} repetitions on "
          f"{ds.n_users} users / {ds.n_ratings} ratings")
    t0 = time.time()
    grid = run_experiment(cfg, ds)
    grid.write_csv(args.out)
    print(f"pp: {grid.pp_mean:.4f} +- {grid.pp_sd:.4f}")
    print(f"wrote {len(grid.rows)} rows -> {os.path.abspath(args.out)} "
          f"({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
