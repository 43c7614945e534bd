"""Feature-group ablation runs and their reports."""
from __future__ import annotations

import csv
import datetime as dt
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .boosting import BoostParams, TreeEnsemble, train
from .dataset import bundled_dataset_path, derive_labels, load_dataset_with_report, snapshot_date, split
from .features import OPTIONAL_GROUPS, EncoderBundle, FeatureGroup, assemble_matrix
from .metrics import concordance_index
from .schema import load_schema
from .survival import labels_to_bounds

log = logging.getLogger(__name__)

MODES = ("powerset32", "nonempty31")
ENUMERATION_NOTE = (
    "Basic is always present. Five optional groups give 32 subsets including Basic-only "
    "(powerset32) or 31 non-empty optional subsets (nonempty31); a count of 31 that also "
    "includes Basic-only is not arithmetically possible, so both modes are offered."
)


def enumerate_combinations(mode: str = "powerset32", optional=OPTIONAL_GROUPS) -> list[tuple[FeatureGroup, ...]]:
    """Group subsets to evaluate, ordered by size and then by sorted group names."""
    mode = mode.lower()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    optional = [FeatureGroup(g) for g in optional]
    start = 0 if mode == "powerset32" else 1
    subsets = []
    for k in range(start, len(optional) + 1):
        for combo in itertools.combinations(optional, k):
            subsets.append(combo)
    subsets.sort(key=lambda c: (len(c), sorted(g.value for g in c)))
    order = list(FeatureGroup)
    return [tuple(sorted((FeatureGroup.BASIC,) + c, key=order.index)) for c in subsets]


def combo_label(combo) -> str:
    return "+".join(FeatureGroup(g).value for g in combo)


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    out: str = "results"
    split_ratio: float = 0.8
    seed: int = 7
    mode: str = "powerset32"
    drop_leaky: bool = False
    snapshot: str | None = None
    params: BoostParams = field(default_factory=BoostParams)
    save_models: bool = True

    def __post_init__(self):
        if isinstance(self.params, dict):
            self.params = BoostParams.from_dict(self.params)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.params.seed != self.seed:
            self.params = replace(self.params, seed=self.seed)

    @property
    def dataset_path(self) -> Path:
        return Path(self.dataset) if self.dataset else bundled_dataset_path()

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"}
        d["dataset"] = str(self.dataset_path)
        d["params"] = self.params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        params = dict(d.pop("params", {}) or {})
        for key in list(d):
            if key in BoostParams().to_dict() and key != "seed":
                params[key] = d.pop(key)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        params.setdefault("seed", d.get("seed", 7))
        return cls(params=BoostParams.from_dict(params), **d)


@dataclass
class ReportRow:
    combination: str
    groups: list
    n_columns: int
    train_rows: int
    valid_rows: int
    c_index: float | None = None
    comparable_pairs: int = 0
    best_iteration: int = 0
    rounds: int = 0
    final_valid_nll: float | None = None
    mean_predicted_days: float | None = None
    error: str | None = None

    @property
    def c_index_defined(self) -> bool:
        return self.c_index is not None


CSV_FIELDS = [f.name for f in fields(ReportRow)]


@dataclass
class RunArtifacts:
    history: dict
    best_iteration: int
    predictions: list  # (cve_id, lower, upper, event, predicted_days)
    model: TreeEnsemble | None = None


@dataclass
class ExperimentReport:
    rows: list
    metadata: dict
    runs: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls([ReportRow(**r) for r in d["rows"]], d["metadata"])

    def row(self, combination: str) -> ReportRow:
        for r in self.rows:
            if r.combination == combination:
                return r
        raise KeyError(combination)


def _run_one(combo, train_recs, valid_recs, train_labels, valid_labels, config: ExperimentConfig):
    label = combo_label(combo)
    encoders = EncoderBundle.fit(train_recs)
    Xt = assemble_matrix(train_recs, combo, encoders, config.drop_leaky)
    Xv = assemble_matrix(valid_recs, combo, encoders, config.drop_leaky)
    row = ReportRow(label, [g.value for g in combo], Xt.shape[1], len(train_recs), len(valid_recs))
    model = train(Xt, train_labels, Xv, valid_labels, config.params)
    pred = model.predict(Xv, until_best=True)
    ci = concordance_index(valid_labels, pred)
    row.c_index = ci.c_index if ci.defined else None
    row.comparable_pairs = ci.comparable_pairs
    row.best_iteration = model.best_iteration
    row.rounds = model.n_rounds
    row.final_valid_nll = model.history["valid"][model.best_iteration - 1]
    row.mean_predicted_days = float(np.mean(pred))
    lower, upper = labels_to_bounds(valid_labels)
    preds = [(r.cve_id, float(lo), float(hi), bool(lo == hi), float(p))
             for r, lo, hi, p in zip(valid_recs, lower, upper, pred)]
    artifacts = RunArtifacts(model.history, model.best_iteration, preds, model if config.save_models else None)
    return row, artifacts


def run_experiments(config: ExperimentConfig, combinations=None) -> ExperimentReport:
    """Train and evaluate one model per feature-group combination.

    Encoders are fitted on the training split of every run. A failing
    combination is recorded in its row and does not stop the others.
    """
    started = time.perf_counter()
    records, load_report = load_dataset_with_report(config.dataset_path)
    snapshot = dt.date.fromisoformat(config.snapshot) if config.snapshot else snapshot_date(records)
    train_recs, valid_recs = split(records, config.split_ratio, config.seed)
    train_labels = derive_labels(train_recs, snapshot)
    valid_labels = derive_labels(valid_recs, snapshot)
    combos = combinations if combinations is not None else enumerate_combinations(config.mode)

    rows, runs = [], {}
    for combo in combos:
        label = combo_label(combo)
        try:
            row, art = _run_one(combo, train_recs, valid_recs, train_labels, valid_labels, config)
            runs[label] = art
        except Exception as exc:  # recorded per row, run continues
            log.exception("combination %s failed", label)
            row = ReportRow(label, [FeatureGroup(g).value for g in combo], 0, len(train_recs), len(valid_recs),
                            error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
        log.info("%-45s c_index=%s best_iteration=%d", label, row.c_index, row.best_iteration)

    metadata = {
        "config": config.to_dict(),
        "schema_hash": load_schema().digest,
        "snapshot": snapshot.isoformat(),
        "dataset_rows": load_report.rows,
        "dataset_unique_cve_ids": load_report.unique_cve_ids,
        "leaky_columns": "dropped" if config.drop_leaky else "included",
        "enumeration": config.mode,
        "enumeration_note": ENUMERATION_NOTE,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    return ExperimentReport(rows, metadata, runs)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "+".join(v)
    return str(v)


def emit_report(report: ExperimentReport, out_dir, fmt: str = "csv") -> list[Path]:
    """Write the combination table, per-run histories and predictions, and the config echo."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        path = out / "combinations.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for r in report.rows:
                w.writerow([_fmt(getattr(r, k)) for k in CSV_FIELDS])
    elif fmt == "json":
        path = out / "combinations.json"
        path.write_text(json.dumps(report.to_dict(), indent=1, allow_nan=False))
    else:
        raise ValueError("format must be 'csv' or 'json'")
    written.append(path)

    for label, art in report.runs.items():
        hpath = out / f"history_{label}.csv"
        with hpath.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "train_nll", "valid_nll"])
            for i, (tr, va) in enumerate(itertools.zip_longest(art.history["train"], art.history["valid"]), 1):
                w.writerow([i, _fmt(tr), _fmt(va)])
        ppath = out / f"predictions_{label}.csv"
        with ppath.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cve_id", "lower_days", "upper_days", "event", "predicted_days"])
            for cve, lo, hi, ev, p in art.predictions:
                w.writerow([cve or "", _fmt(lo), _fmt(hi), int(ev), _fmt(p)])
        written += [hpath, ppath]
        if art.model is not None:
            mpath = out / f"model_{label}.json"
            art.model.save(mpath)
            written.append(mpath)

    echo = out / "config_echo.json"
    echo.write_text(json.dumps(report.metadata, indent=1, allow_nan=False))
    written.append(echo)
    return written


def read_report(path) -> ExperimentReport:
    """Load ``combinations.json`` or ``combinations.csv`` back into a report."""
    path = Path(path)
    if path.suffix == ".json":
        return ExperimentReport.from_dict(json.loads(path.read_text()))
    rows = []
    with path.open(newline="") as fh:
        for raw in csv.DictReader(fh):
            rows.append(ReportRow(
                combination=raw["combination"],
                groups=raw["groups"].split("+") if raw["groups"] else [],
                n_columns=int(raw["n_columns"]),
                train_rows=int(raw["train_rows"]),
                valid_rows=int(raw["valid_rows"]),
                c_index=float(raw["c_index"]) if raw["c_index"] else None,
                comparable_pairs=int(raw["comparable_pairs"]),
                best_iteration=int(raw["best_iteration"]),
                rounds=int(raw["rounds"]),
                final_valid_nll=float(raw["final_valid_nll"]) if raw["final_valid_nll"] else None,
                mean_predicted_days=float(raw["mean_predicted_days"]) if raw["mean_predicted_days"] else None,
                error=raw["error"] or None,
            ))
    echo = path.parent / "config_echo.json"
    meta = json.loads(echo.read_text()) if echo.exists() else {}
    return ExperimentReport(rows, meta)


def read_predictions(path) -> tuple[np.ndarray, np.ndarray]:
    """``(bounds, predicted_days)`` from a ``predictions_<combo>.csv`` file."""
    lower, upper, pred = [], [], []
    with Path(path).open(newline="") as fh:
        for raw in csv.DictReader(fh):
            lower.append(float(raw["lower_days"]))
            upper.append(float(raw["upper_days"]))
            pred.append(float(raw["predicted_days"]))
    return np.c_[lower, upper], np.asarray(pred)
