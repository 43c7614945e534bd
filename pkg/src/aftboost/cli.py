"""Command-line interface: ``aftboost {ingest,train,predict,evaluate,experiment,synth}``.

Settings are resolved as built-in defaults, then the ``--config`` JSON file,
then explicit flags.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .boosting import BoostParams, TreeEnsemble, train
from .dataset import derive_labels, load_dataset, snapshot_date, split, synthesize_records, write_dataset
from .exceptions import DataFaultError, LabelError, ModelFormatError, SchemaError
from .experiment import ExperimentConfig, emit_report, run_experiments
from .features import EncoderBundle, FeatureGroup, assemble_matrix
from .metrics import concordance_index, mean_negloglik
from .schema import GROUP_ORDER

log = logging.getLogger("aftboost")

# flag dest -> BoostParams.to_dict() key
PARAM_FLAGS = {
    "learning_rate": "learning_rate",
    "max_depth": "max_depth",
    "subsample": "subsample",
    "min_child_weight": "min_child_weight",
    "colsample_bynode": "colsample_bynode",
    "reg_lambda": "lambda",
    "reg_alpha": "alpha",
    "rounds": "num_rounds",
    "patience": "early_stopping_patience",
    "sigma": "sigma",
    "distribution": "distribution",
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--dataset", help="dataset CSV (default: bundled snapshot)")
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--out", help="output directory or file")
    p.add_argument("--seed", type=int)
    p.add_argument("--split-ratio", type=float, dest="split_ratio")
    p.add_argument("--mode", choices=["powerset32", "nonempty31"])
    p.add_argument("--drop-leaky", action="store_true", default=None, dest="drop_leaky")
    p.add_argument("--sigma", type=float)
    p.add_argument("--distribution", choices=["normal", "logistic", "extreme"])
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--max-depth", type=int, dest="max_depth")
    p.add_argument("--subsample", type=float)
    p.add_argument("--min-child-weight", type=float, dest="min_child_weight")
    p.add_argument("--colsample-bynode", type=float, dest="colsample_bynode")
    p.add_argument("--lambda", type=float, dest="reg_lambda")
    p.add_argument("--alpha", type=float, dest="reg_alpha")
    p.add_argument("--rounds", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--snapshot", help="snapshot date YYYY-MM-DD (default: latest date in the file)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aftboost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="turn CVE-feed JSON pages into dataset rows")
    _common(p)
    p.add_argument("fixtures", nargs="+", help="feed page JSON files")

    p = sub.add_parser("train", help="train one model on a feature-group combination")
    _common(p)
    p.add_argument("--groups", default=",".join(GROUP_ORDER), help="comma-separated groups (Basic is implied)")

    p = sub.add_parser("predict", help="predict time to fix in days")
    _common(p)
    p.add_argument("--model", required=True, help="directory written by 'train'")
    p.add_argument("--all-trees", action="store_true", help="use every tree instead of stopping at best_iteration")

    p = sub.add_parser("evaluate", help="C-index and mean NLL of a trained model")
    _common(p)
    p.add_argument("--model", required=True, help="directory written by 'train'")
    p.add_argument("--on", choices=["valid", "all"], default="valid")

    p = sub.add_parser("experiment", help="run every feature-group combination")
    _common(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--no-models", action="store_true", help="do not write per-combination model files")

    p = sub.add_parser("synth", help="write a synthetic dataset whose signal lives in the Basic group")
    _common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--censor-frac", type=float, default=0.2, dest="censor_frac")
    return parser


def resolve_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    cfg = ExperimentConfig.from_dict(doc)
    params = cfg.params.to_dict()
    for dest, key in PARAM_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            params[key] = value
    updates = {}
    for key in ("dataset", "out", "seed", "split_ratio", "mode", "drop_leaky", "snapshot"):
        value = getattr(args, key, None)
        if value is not None:
            updates[key] = value
    seed = updates.get("seed", cfg.seed)
    params["seed"] = seed
    return replace(cfg, params=BoostParams.from_dict(params), **updates)


def _split_labeled(cfg: ExperimentConfig):
    records = load_dataset(cfg.dataset_path)
    snap = _snapshot(cfg, records)
    train_recs, valid_recs = split(records, cfg.split_ratio, cfg.seed)
    return records, train_recs, valid_recs, snap


def _snapshot(cfg, records):
    return dt.date.fromisoformat(cfg.snapshot) if cfg.snapshot else snapshot_date(records)


def cmd_ingest(args, cfg):
    from .acquisition import ingest

    out = Path(cfg.out or "ingest")
    out.mkdir(parents=True, exist_ok=True)
    records, report = ingest(args.fixtures, out / "ingested.csv")
    (out / "ingest_report.json").write_text(json.dumps(report.to_dict(), indent=1))
    print(json.dumps(report.to_dict(), indent=1))
    return 0


def cmd_train(args, cfg):
    groups = [FeatureGroup(g.strip()) for g in args.groups.split(",") if g.strip()]
    if FeatureGroup.BASIC not in groups:
        groups.insert(0, FeatureGroup.BASIC)
    _, train_recs, valid_recs, snap = _split_labeled(cfg)
    encoders = EncoderBundle.fit(train_recs)
    Xt = assemble_matrix(train_recs, groups, encoders, cfg.drop_leaky)
    Xv = assemble_matrix(valid_recs, groups, encoders, cfg.drop_leaky)
    yt, yv = derive_labels(train_recs, snap), derive_labels(valid_recs, snap)
    model = train(Xt, yt, Xv, yv, cfg.params)
    out = Path(cfg.out or "model")
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    encoders.save(out / "encoders.json")
    run = cfg.to_dict()
    run.update(groups=[g.value for g in groups], snapshot=snap.isoformat())
    (out / "run.json").write_text(json.dumps(run, indent=1))
    with (out / "history.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "train_nll", "valid_nll"])
        for i, (a, b) in enumerate(zip(model.history["train"], model.history["valid"]), 1):
            w.writerow([i, repr(a), repr(b)])
    ci = concordance_index(yv, model.predict(Xv, until_best=True))
    print(json.dumps({"rounds": model.n_rounds, "best_iteration": model.best_iteration,
                      "valid_c_index": ci.c_index if ci.defined else None}, indent=1))
    return 0


def _load_run(model_dir):
    model_dir = Path(model_dir)
    model = TreeEnsemble.load(model_dir / "model.json")
    encoders = EncoderBundle.load(model_dir / "encoders.json")
    run = json.loads((model_dir / "run.json").read_text())
    return model, encoders, run


def cmd_predict(args, cfg):
    model, encoders, run = _load_run(args.model)
    records = load_dataset(cfg.dataset_path)
    X = assemble_matrix(records, run["groups"], encoders, run["drop_leaky"])
    pred = model.predict(X, until_best=not args.all_trees)
    out = Path(cfg.out or "predictions.csv")
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cve_id", "predicted_days"])
        for r, p in zip(records, pred):
            w.writerow([r.cve_id or "", repr(float(p))])
    print(f"wrote {len(records)} predictions to {out}")
    return 0


def cmd_evaluate(args, cfg):
    model, encoders, run = _load_run(args.model)
    records = load_dataset(cfg.dataset_path)
    snap = dt.date.fromisoformat(cfg.snapshot or run["snapshot"])
    if args.on == "valid":
        records = split(records, run["split_ratio"], run["seed"])[1]
    labels = derive_labels(records, snap)
    X = assemble_matrix(records, run["groups"], encoders, run["drop_leaky"])
    margin = model.predict_margin(X, until_best=True)
    ci = concordance_index(labels, np.exp(margin))
    result = {
        "rows": len(records),
        "c_index": ci.c_index if ci.defined else None,
        "comparable_pairs": ci.comparable_pairs,
        "mean_negloglik": mean_negloglik(labels, margin, model.params.aft),
        "best_iteration": model.best_iteration,
    }
    print(json.dumps(result, indent=1))
    return 0


def cmd_experiment(args, cfg):
    if args.no_models:
        cfg = replace(cfg, save_models=False)
    out = Path(cfg.out or "results")
    report = run_experiments(cfg)
    emit_report(report, out, args.format)
    failed = sum(r.error is not None for r in report.rows)
    print(f"{len(report.rows)} combinations written to {out} ({failed} failed)")
    return 0


def cmd_synth(args, cfg):
    records, _ = synthesize_records(args.n, censor_frac=args.censor_frac,
                                    sigma=args.sigma if args.sigma is not None else 0.3, seed=cfg.seed)
    out = Path(cfg.out or "synthetic.csv")
    write_dataset(records, out)
    print(f"wrote {len(records)} synthetic records to {out}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (OSError, ValueError, SchemaError, LabelError, ModelFormatError, DataFaultError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
