#!/usr/bin/env python3
"""Write the synthetic benchmark rating files used by the examples and CLI.

Produces a tab-separated 943 x 1682 / 100000-rating corpus (u.data format)
and a 706-user half-star corpus (ratings.csv format), both deterministic in
the seed.
"""

import argparse
import os

from shillguard import synth


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    ds = synth.make_ml100k_like(seed=args.seed)
    tab = os.path.join(args.out_dir, "u.data")
    synth.write_tab(ds, tab)
    print(f"wrote {tab} ({ds.n_users} users, {ds.n_items} items, {ds.n_ratings} ratings)")

    small = synth.make_latest_small_like(seed=args.seed)
    csv = os.path.join(args.out_dir, "ratings.csv")
    synth.write_ratings_csv(small, csv, half_star=True)
    print(f"wrote {csv} ({small.n_users} users, {small.n_ratings} ratings, half-star)")


if __name__ == "__main__":
    main()
