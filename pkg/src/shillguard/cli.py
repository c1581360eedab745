"""Command-line interface wiring all stages together.

Subcommands: ingest, inject, featurize, train, detect, eval, roc. Values are
resolved flag > config file > built-in default; every output file is written
atomically and carries the master seed in a leading comment line. Exit codes:
0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .attacks import ATTACK_MODELS, AttackSpec, generate_profiles, inject
from .dataset import (
    DataFormatError,
    INTENTS,
    NUKE,
    PUSH,
    compute_item_stats,
    dump_csv,
    load_movielens_csv,
    load_movielens_tab,
)
from .detector import classify
from .evaluation import (
    ExperimentConfig,
    build_training_set,
    cell_roc,
    run_experiment,
    score_dataset,
    train_detector,
    write_roc_csv,
)
from .features import extract_features, write_features_csv
from .regression import (
    LINEAR,
    QUADRATIC,
    REGRESSOR_KINDS,
    apply_regressor,
    load_model,
    save_model,
    sweep_lambda,
)


class UsageError(Exception):
    """Bad paths, malformed input files or invalid configuration."""


def _load_ds(args, cfg: ExperimentConfig | None = None):
    path = args.data or (cfg.dataset_path if cfg else None)
    if not path:
        raise UsageError("no dataset given (--data or config dataset_path)")
    fmt = args.format or (cfg.dataset_format if cfg else "tab")
    scale = tuple(args.scale) if args.scale else (cfg.scale if cfg else (1, 5))
    half_star = args.half_star or bool(cfg and cfg.half_star)
    try:
        if fmt == "tab":
            return load_movielens_tab(path, scale)
        return load_movielens_csv(path, scale, half_star=half_star)
    except (FileNotFoundError, IsADirectoryError) as exc:
        raise UsageError(str(exc)) from None
    except DataFormatError as exc:
        raise UsageError(str(exc)) from None


def _build_config(args) -> ExperimentConfig:
    """Config file (if any) overridden by whichever flags were given."""
    base: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                base = json.load(fh)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
    overrides = {
        "dataset_path": args.data,
        "dataset_format": args.format,
        "half_star": args.half_star or None,
        "scale": tuple(args.scale) if args.scale else None,
        "intent": getattr(args, "intent", None),
        "regressor": getattr(args, "regressor", None),
        "lam": getattr(args, "lam", None),
        "fa_target": getattr(args, "fa_target", None),
        "master_seed": getattr(args, "seed", None),
        "repetitions": getattr(args, "repetitions", None),
        "pop_threshold": getattr(args, "pop_threshold", None),
        "unpop_threshold": getattr(args, "unpop_threshold", None),
        "knn_k": getattr(args, "k", None),
    }
    if getattr(args, "method", None):
        overrides["knn"] = args.method == "both" or args.method == "knn"
    base.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig.from_dict(base)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    errs = cfg.validate()
    if errs:
        raise UsageError("invalid config:\n  " + "\n  ".join(errs))
    return cfg


def _atomic_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# -- subcommands ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    ds = _load_ds(args)
    stats = compute_item_stats(
        ds,
        pop_threshold=args.pop_threshold if args.pop_threshold is not None else 200,
        unpop_threshold=args.unpop_threshold if args.unpop_threshold is not None else 5,
        intent=PUSH,
    )
    print(f"users: {ds.n_users}")
    print(f"items: {ds.n_items}")
    print(f"ratings: {ds.n_ratings}")
    print(f"sparsity: {100 * ds.sparsity():.1f}%")
    print(f"system mean: {stats.system_mean:.4f}")
    print(f"genuine: {len(ds.genuine_users)}  attackers: {len(ds.attacker_users)}")
    if args.dump:
        dump_csv(ds, args.dump)
        print(f"wrote {args.dump}")
    return 0


def cmd_inject(args) -> int:
    ds = _load_ds(args)
    stats = compute_item_stats(
        ds,
        pop_threshold=args.pop_threshold if args.pop_threshold is not None else 200,
        unpop_threshold=args.unpop_threshold if args.unpop_threshold is not None else 5,
        intent=args.intent,
    )
    try:
        spec = AttackSpec(
            model=args.model,
            intent=args.intent,
            attack_size=args.attack_size,
            filler_size=args.filler_size,
            target_count=args.target_count,
            selected_count=args.selected_count,
            aop_top_percent=args.aop_top_percent if args.model == "AOP" else None,
            seed=args.seed if args.seed is not None else 0,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    profiles = generate_profiles(spec, stats, ds)
    injected = inject(ds, profiles)
    dump_csv(injected, args.out)
    print(f"injected {len(profiles)} {args.model} profiles -> {args.out}")
    return 0


def cmd_featurize(args) -> int:
    ds = _load_ds(args)
    stats = compute_item_stats(
        ds,
        pop_threshold=args.pop_threshold if args.pop_threshold is not None else 200,
        unpop_threshold=args.unpop_threshold if args.unpop_threshold is not None else 5,
        intent=args.intent,
    )
    table = extract_features(ds, stats, args.intent, args.r_mid)
    write_features_csv(table, args.out)
    print(f"wrote {len(table.users)} feature rows -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _build_config(args)
    ds = _load_ds(args, cfg)
    tset = build_training_set(ds, cfg, cfg.master_seed)
    if args.lambda_sweep:
        rows = ~tset.attacker_mask if cfg.fit_population == "genuine" else np.ones(
            len(tset.attacker_mask), dtype=bool
        )
        psi = apply_regressor(cfg.regressor, tset.r_norm[rows])
        best, table = sweep_lambda(psi, tset.i_norm[rows], seed=cfg.master_seed)
        for lam, pp in table:
            print(f"lambda={lam:g}: holdout pp={pp:.4f}")
        print(f"selected lambda={best:g}")
        cfg = dataclasses.replace(cfg, lam=best)
    if args.compare_regressors:
        for kind in (LINEAR, QUADRATIC):
            _, rep = train_detector(tset, dataclasses.replace(cfg, regressor=kind))
            print(f"pp[{kind}]: {rep['pp_train']:.4f} (genuine-only {rep['pp_train_genuine']:.4f})")
    model, report = train_detector(tset, cfg)
    save_model(model, args.out)
    print(f"pp[{cfg.regressor}]: {report['pp_train']:.4f}")
    print(f"threshold: {model.threshold:.6g} (target false alarm {cfg.fa_target})")
    print(f"wrote {args.out}")
    return 0


def cmd_detect(args) -> int:
    try:
        model = load_model(args.model)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    if model.threshold is None:
        raise UsageError("model file has no stored threshold")
    ds = _load_ds(args)
    scored = score_dataset(model, ds)
    labels = classify(scored.scores, model.threshold)
    lines = [f"# threshold={model.threshold:.10g}", "user,score,label,truth"]
    for u, s, lab, att in zip(scored.users, scored.scores, labels, scored.truth):
        truth = "attacker" if att else ds.labels[u]
        lines.append(f"{u},{s:.10g},{lab},{truth}")
    _atomic_text(args.out, "\n".join(lines) + "\n")
    print(f"flagged {int(labels.sum())} of {len(labels)} users -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _build_config(args)
    ds = _load_ds(args, cfg)
    grid = run_experiment(cfg, ds)
    os.makedirs(args.out_dir, exist_ok=True)
    out = os.path.join(args.out_dir, "metrics.csv")
    grid.write_csv(out)
    print(f"pp: {grid.pp_mean:.4f} +- {grid.pp_sd:.4f}")
    print(f"wrote {len(grid.rows)} grid rows -> {out}")
    return 0


def cmd_roc(args) -> int:
    cfg = _build_config(args)
    ds = _load_ds(args, cfg)
    if args.attack_model not in ATTACK_MODELS:
        raise UsageError(f"unknown attack model {args.attack_model!r}")
    points = cell_roc(cfg, ds, args.attack_model, args.attack_size, args.filler_size)
    write_roc_csv(points, args.out, cfg.master_seed)
    print(f"wrote {len(points)} ROC points -> {args.out}")
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shillguard",
        description="Detect shilling / profile-injection attacks in rating data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="rating file path")
    data.add_argument("--format", choices=("tab", "csv"), default=None)
    data.add_argument("--scale", nargs=2, type=int, metavar=("MIN", "MAX"), default=None)
    data.add_argument("--half-star", action="store_true")
    data.add_argument("--pop-threshold", type=int, default=None)
    data.add_argument("--unpop-threshold", type=int, default=None)

    p = sub.add_parser("ingest", parents=[data], help="summarise a rating file")
    p.add_argument("--dump", help="write the canonical CSV dump here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("inject", parents=[data], help="inject attack profiles")
    p.add_argument("--model", required=True, choices=ATTACK_MODELS)
    p.add_argument("--intent", choices=INTENTS, default=NUKE)
    p.add_argument("--attack-size", type=float, required=True)
    p.add_argument("--filler-size", type=float, required=True)
    p.add_argument("--target-count", type=int, default=1)
    p.add_argument("--selected-count", type=int, default=10)
    p.add_argument("--aop-top-percent", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("featurize", parents=[data], help="export per-user features")
    p.add_argument("--intent", choices=INTENTS, default=NUKE)
    p.add_argument("--r-mid", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[data], help="train a detector model")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--intent", choices=INTENTS, default=None)
    p.add_argument("--regressor", choices=REGRESSOR_KINDS, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--lambda-sweep", action="store_true",
                   help="pick lambda by holdout predictive power")
    p.add_argument("--fa-target", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--compare-regressors", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", parents=[data], help="score users with a model")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", parents=[data], help="run the evaluation grid")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--intent", choices=INTENTS, default=None)
    p.add_argument("--regressor", choices=REGRESSOR_KINDS, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--fa-target", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--method", choices=("regression", "knn", "both"), default=None)
    p.add_argument("--k", type=int, default=None, help="KNN neighbour count")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", parents=[data], help="export one cell's ROC curve")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--intent", choices=INTENTS, default=None)
    p.add_argument("--regressor", choices=REGRESSOR_KINDS, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--fa-target", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--attack-model", required=True)
    p.add_argument("--attack-size", type=float, required=True)
    p.add_argument("--filler-size", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_roc)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
