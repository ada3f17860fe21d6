"""Command-line interface: select, evaluate, grid, ablate, gradcheck.

Every command reads an optional JSON config file (schema_version 1) whose
values individual flags override, and writes timestamp-free artifacts so
identical configs reproduce identical files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

import argparse
import dataclasses
import itertools
import json
import os
import sys

import numpy as np

from .baselines import SelectorSpec
from .data import Dataset, load_registry, resolve_dataset, standardize
from .errors import AllgError, ConfigError, DataError, NumericalError
from .evaluate import Protocol, run_protocol
from .gradcheck import run_all
from .model import (
    ablation_variant,
    config_from_dict,
    config_to_dict,
    default_encoder_dims,
    save_checkpoint,
)
from .rng import substream
from .training import run_selection

SCHEMA_VERSION = 1
ABLATION_ORDER = ("no_graph", "knn_only", "one_matrix", "tied_two", "distinct_two", "full")


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must contain a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {version!r}")
    return cfg


def _parse_int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _gather(args) -> dict:
    """Merge config file values with CLI overrides (flags win)."""
    cfg = _load_config_file(args.config) if args.config else {}
    if isinstance(cfg.get("dataset"), str):
        cfg["dataset"] = {"path": cfg["dataset"]}
    if getattr(args, "dataset", None) is not None:
        cfg.setdefault("dataset", {})["path"] = args.dataset
    if getattr(args, "label_column", None) is not None:
        cfg.setdefault("dataset", {})["label_column"] = args.label_column
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if getattr(args, "budgets", None):
        cfg.setdefault("protocol", {})["budgets"] = _parse_int_list(args.budgets)
    if getattr(args, "selector", None):
        cfg["selectors"] = [{"kind": k.strip()} for k in args.selector.split(",") if k.strip()]
    if getattr(args, "registry", None):
        cfg["registry"] = args.registry
    if getattr(args, "subsample", None):
        cfg["subsample"] = args.subsample
    cfg.setdefault("seed", 0)
    cfg.setdefault("out", "allg_out")
    return cfg


def _load_dataset(cfg: dict):
    entry = cfg.get("dataset")
    if not entry:
        raise ConfigError("no dataset given; use --dataset PATH|NAME or the config file")
    if isinstance(entry, str):
        entry = {"path": entry}
    registry = load_registry(cfg["registry"]) if cfg.get("registry") else None
    label_column = entry.get("label_column")
    if isinstance(label_column, str) and label_column.isdigit():
        label_column = int(label_column)
    ds = resolve_dataset(
        entry["path"],
        registry=registry,
        label_column=label_column,
        delimiter=entry.get("delimiter", ","),
        header=entry.get("header", "auto"),
    )
    return _maybe_subsample(ds, cfg)


def _maybe_subsample(ds, cfg: dict):
    """Deterministic uniform subsample for smoke-testing large datasets."""
    size = cfg.get("subsample")
    if not size or size >= ds.n_samples:
        return ds
    if size < 2:
        raise ConfigError(f"subsample size must be >= 2, got {size}")
    keep = np.sort(substream(cfg["seed"], "subsample").permutation(ds.n_samples)[:size])
    return Dataset(
        features=ds.features[:, keep],
        labels=None if ds.labels is None else ds.labels[keep],
        name=f"{ds.name}/sub{size}",
        feature_names=ds.feature_names,
    )


def _model_config(cfg: dict, d: int, seed: int):
    opts = dict(cfg.get("model", {}))
    if "encoder_dims" not in opts:
        opts["encoder_dims"] = default_encoder_dims(d)
    opts.setdefault("seed", seed)
    return config_from_dict(opts)


def _protocol(cfg: dict, seed: int) -> Protocol:
    opts = dict(cfg.get("protocol", {}))
    runs = opts.get("runs", 5)
    opts.setdefault("seeds", [seed + i for i in range(runs)])
    return Protocol(**opts)


def _selector_specs(cfg: dict, seed: int) -> list:
    entries = cfg.get("selectors", [{"kind": k} for k in ("random", "kmeans", "dcs", "allg")])
    specs = []
    for entry in entries:
        if isinstance(entry, str):
            entry = {"kind": entry}
        params = dict(entry.get("params", {}))
        if entry.get("kind") == "allg" and "model" in cfg and "config" not in params:
            params = {**cfg["model"], **params}
        specs.append(SelectorSpec(kind=entry["kind"], params=params, seed=seed))
    return specs


def _out_dir(cfg: dict) -> str:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_ranking(path, result, limit=None) -> None:
    indices = result.ranked_indices if limit is None else result.ranked_indices[:limit]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,score\n")
        for idx, score in zip(indices, result.scores):
            fh.write(f"{idx},{repr(score)}\n")


def cmd_select(args) -> int:
    cfg = _gather(args)
    ds = _load_dataset(cfg)
    if args.m is not None and not 1 <= args.m <= ds.n_samples:
        raise ConfigError(f"--m {args.m} must lie in 1..{ds.n_samples} for this pool")
    std, _, _ = standardize(ds)
    mcfg = _model_config(cfg, ds.dim, cfg["seed"])
    result, params, history, _ = run_selection(std.features, mcfg)
    out = _out_dir(cfg)
    _write_ranking(os.path.join(out, "ranking.csv"), result, limit=args.m)
    history.save_csv(os.path.join(out, "losses.csv"))
    save_checkpoint(os.path.join(out, "checkpoint.npz"), params, mcfg)
    _write_json(os.path.join(out, "run.json"), {
        "command": "select",
        "dataset": ds.name,
        "n_candidates": ds.n_samples,
        "config": config_to_dict(mcfg),
        "final_losses": result.final_losses,
    })
    print(f"wrote ranking for {ds.n_samples} candidates to {out}/ranking.csv")
    return 0


def _snapshot(out: str, command: str, cfg: dict, dataset_name: str) -> None:
    _write_json(os.path.join(out, "run.json"),
                {"command": command, "dataset": dataset_name, "config": cfg})


def cmd_evaluate(args) -> int:
    cfg = _gather(args)
    ds = _load_dataset(cfg)
    protocol = _protocol(cfg, cfg["seed"])
    specs = _selector_specs(cfg, cfg["seed"])
    report = run_protocol(ds, specs, protocol)
    out = _out_dir(cfg)
    report.to_csv(os.path.join(out, "report.csv"))
    report.save_means_csv(os.path.join(out, "means.csv"))
    report.save_summary(os.path.join(out, "summary.json"))
    _snapshot(out, "evaluate", cfg, ds.name)
    for sel in report.selectors():
        for clf in report.classifiers():
            print(f"{sel} + {clf}: average accuracy {report.grand_mean(sel, clf):.4f}")
    return 0


def cmd_grid(args) -> int:
    cfg = _gather(args)
    ds = _load_dataset(cfg)
    grid = cfg.get("grid", {})
    alphas = grid.get("alpha", [0.1, 1.0, 10.0])
    betas = grid.get("beta", [0.1, 1.0, 10.0])
    lams = grid.get("lambda", [0.1, 1.0, 10.0])
    if not (alphas and betas and lams):
        raise ConfigError("grid lists must be non-empty")
    base_protocol = _protocol(cfg, cfg["seed"])
    # One fixed validation seed for the whole sweep.
    protocol = dataclasses.replace(base_protocol, runs=1, seeds=(cfg["seed"],))
    rows = []
    for alpha, beta, lam in itertools.product(sorted(alphas), sorted(betas), sorted(lams)):
        model_opts = {**cfg.get("model", {}), "alpha": alpha, "beta": beta, "lam": lam}
        spec = SelectorSpec(kind="allg", params=model_opts, seed=cfg["seed"])
        report = run_protocol(ds, [spec], protocol)
        mean = float(
            sum(report.grand_mean("allg", clf) for clf in report.classifiers())
            / len(report.classifiers())
        )
        rows.append((alpha, beta, lam, mean))
        print(f"alpha={alpha} beta={beta} lambda={lam}: mean accuracy {mean:.4f}")
    best = max(rows, key=lambda r: (r[3], (-r[0], -r[1], -r[2])))
    out = _out_dir(cfg)
    with open(os.path.join(out, "grid.csv"), "w", encoding="utf-8") as fh:
        fh.write("alpha,beta,lambda,mean_accuracy\n")
        for alpha, beta, lam, mean in rows:
            fh.write(f"{alpha},{beta},{lam},{repr(mean)}\n")
    _write_json(os.path.join(out, "best.json"), {
        "alpha": best[0], "beta": best[1], "lambda": best[2], "mean_accuracy": best[3],
    })
    _snapshot(out, "grid", cfg, ds.name)
    print(f"best: alpha={best[0]} beta={best[1]} lambda={best[2]} ({best[3]:.4f})")
    return 0


def cmd_ablate(args) -> int:
    cfg = _gather(args)
    ds = _load_dataset(cfg)
    protocol = _protocol(cfg, cfg["seed"])
    base = _model_config(cfg, ds.dim, cfg["seed"])
    specs = []
    for variant in ABLATION_ORDER:
        vcfg = ablation_variant(base, variant)
        specs.append(SelectorSpec(kind="allg", params={"config": vcfg, "name": variant},
                                  seed=cfg["seed"]))
    report = run_protocol(ds, specs, protocol)
    out = _out_dir(cfg)
    report.to_csv(os.path.join(out, "ablation_report.csv"))
    with open(os.path.join(out, "ablation.csv"), "w", encoding="utf-8") as fh:
        budgets = report.budgets()
        fh.write("variant,classifier," + ",".join(str(b) for b in budgets) + ",average\n")
        for variant in ABLATION_ORDER:
            for clf in report.classifiers():
                means = [report.mean_accuracy(variant, clf, b) for b in budgets]
                avg = report.grand_mean(variant, clf)
                fh.write(f"{variant},{clf},"
                         + ",".join(f"{v:.6f}" for v in means)
                         + f",{avg:.6f}\n")
    _snapshot(out, "ablate", cfg, ds.name)
    for variant in ABLATION_ORDER:
        avgs = [report.grand_mean(variant, clf) for clf in report.classifiers()]
        print(f"{variant}: average accuracy {sum(avgs) / len(avgs):.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    reports = run_all()
    lines = []
    failed = False
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        lines.append(f"{status} {rep.name}: max relative error {rep.max_rel_err:.3e} "
                     f"(tolerance {rep.tolerance:.0e})")
        failed = failed or not rep.passed
    print("\n".join(lines))
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "gradcheck.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    if failed:
        raise NumericalError("gradient check failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allg",
        description="Unsupervised active learning via learnable graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", help="JSON config file (schema_version 1)")
        p.add_argument("--seed", type=int, default=None, help="root random seed")
        p.add_argument("--out", default=None, help="output directory")
        if dataset:
            p.add_argument("--dataset", default=None, help="CSV path or registry name")
            p.add_argument("--label-column", dest="label_column", default=None,
                           help="label column name or index")
            p.add_argument("--registry", default=None, help="dataset manifest JSON")
            p.add_argument("--subsample", type=int, default=None,
                           help="uniformly subsample the dataset to N rows (smoke tests)")

    p = sub.add_parser("select", help="rank a candidate pool with ALLG")
    common(p)
    p.add_argument("--m", type=int, default=None, help="write only the top-m rows")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="benchmark selectors with classifiers")
    common(p)
    p.add_argument("--budgets", default=None, help="comma-separated query budgets")
    p.add_argument("--selector", default=None, help="comma-separated selector kinds")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="hyperparameter grid search for ALLG")
    common(p)
    p.add_argument("--budgets", default=None, help="comma-separated query budgets")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("ablate", help="run all ablation variants")
    common(p)
    p.add_argument("--budgets", default=None, help="comma-separated query budgets")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    common(p, dataset=False)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except AllgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
