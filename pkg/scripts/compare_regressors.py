#!/usr/bin/env python3
"""Linear versus quadratic regressor fit quality, one attack model at a time.

For each attack model the training half is augmented with a 12.5% campaign at
5.2% filler size, both regressors are identified on the mixed set, and their
predictive power on it is reported, averaged over seeds.
"""

import argparse
import dataclasses

import numpy as np

from shillguard import synth
from shillguard.attacks import ATTACK_MODELS
from shillguard.dataset import split_half
from shillguard.evaluation import (
    ExperimentConfig,
    build_training_set,
    system_partition,
    train_detector,
)
from shillguard.regression import LINEAR, QUADRATIC


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--lam", type=float, default=800.0,
                    help="ridge strength for the fit-quality comparison")
    args = ap.parse_args()

    rows = {m: {LINEAR: [], QUADRATIC: []} for m in ATTACK_MODELS}
    for k in range(args.seeds):
        ds = synth.make_ml100k_like(seed=300 + k)
        for m in ATTACK_MODELS:
            cfg = ExperimentConfig(
                master_seed=k,
                train_models=(m,),
                train_filler_sizes=(0.052,),
                train_profiles_per_cell=59,
                fit_population="all",
                normalizer_population="all",
                lam=args.lam,
            )
            part = system_partition(cfg, ds)
            train_half, _ = split_half(ds, k)
            tset = build_training_set(train_half, cfg, k, part)
            for kind in (LINEAR, QUADRATIC):
                _, rep = train_detector(
                    tset, dataclasses.replace(cfg, regressor=kind), seed=k, partition=part
                )
                rows[m][kind].append(rep["pp_train"])

    print(f"{'attack model':18s} {'linear pp':>10s} {'quadratic pp':>13s}")
    for m in ATTACK_MODELS:
        lin = float(np.mean(rows[m][LINEAR]))
        quad = float(np.mean(rows[m][QUADRATIC]))
        print(f"{m:18s} {lin:10.3f} {quad:13.3f}")


if __name__ == "__main__":
    main()
