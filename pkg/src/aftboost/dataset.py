"""Vulnerability dataset I/O, survival label derivation, splitting and synthetic data."""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DataFaultError, SchemaError
from .schema import FeatureMatrix, Schema, load_schema
from .survival import Distribution, SurvivalLabel

log = logging.getLogger(__name__)

MIN_DAYS = 1.0
CVE_PATTERN = re.compile(r"^CVE-\d{4}-\d+$")
BUNDLED_DATASET = "iot_vulnerabilities.csv"


def bundled_dataset_path() -> Path:
    return Path(str(resources.files("aftboost").joinpath("data").joinpath(BUNDLED_DATASET)))


@dataclass(frozen=True)
class VulnRecord:
    """One dataset row: raw values keyed by canonical column name (``None`` = missing).

    ``event`` and ``time2fix_days`` are derived when the record is built: the
    event flag from the remediation field, the time from the fix date minus
    the detection date.
    """

    values: dict
    fix_date: dt.date | None = None
    event: bool = False
    time2fix_days: int | None = None

    def __getitem__(self, name):
        return self.values.get(name)

    @property
    def cve_id(self) -> str | None:
        return self.values.get("CVE-ID")

    @classmethod
    def build(cls, values: dict, fix_date: dt.date | None = None, schema: Schema | None = None) -> "VulnRecord":
        schema = schema or load_schema()
        event = values.get("Remediation") in schema.fix_values
        detected = values.get(schema.detection_column)
        t2f = None
        if fix_date is not None and detected is not None:
            t2f = (fix_date - detected).days
            if t2f < 0:
                raise DataFaultError(f"{values.get('CVE-ID')}: fix date {fix_date} precedes detection {detected}")
        return cls(dict(values), fix_date, event, t2f)


@dataclass
class LoadReport:
    path: str
    rows: int = 0
    unique_cve_ids: int = 0
    parse_failures: int = 0
    duplicates_dropped: int = 0
    failed_cells: dict = field(default_factory=dict)


def _parse_cell(raw: str, ctype: str):
    raw = raw.strip()
    if raw == "":
        return None
    if ctype == "date":
        return dt.date.fromisoformat(raw[:10])
    if ctype == "number":
        v = float(raw)
        if math.isnan(v):
            return None
        return v
    return raw


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_dataset_with_report(path, schema: Schema | None = None) -> tuple[list[VulnRecord], LoadReport]:
    schema = schema or load_schema()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    report = LoadReport(str(path))
    records = []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        mapping = schema.resolve_header(header)
        columns = [(i, mapping.get(h)) for i, h in enumerate(header)]
        types = {c.name: c.type for c in schema.all_columns}
        for lineno, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            key = tuple(row)
            if key in seen:
                report.duplicates_dropped += 1
                continue
            seen.add(key)
            values = {name: None for name in schema.names}
            fix_date = None
            for i, name in columns:
                if name is None or i >= len(row):
                    continue
                try:
                    v = _parse_cell(row[i], types[name])
                    if name == "CVE-ID" and v is not None and not CVE_PATTERN.match(v):
                        raise ValueError(f"bad CVE id {v!r}")
                except ValueError:
                    report.parse_failures += 1
                    report.failed_cells[name] = report.failed_cells.get(name, 0) + 1
                    v = None
                if name == "Fix Date":
                    fix_date = v
                else:
                    values[name] = v
            try:
                rec = VulnRecord.build(values, fix_date, schema)
            except DataFaultError:
                report.parse_failures += 1
                report.failed_cells["Fix Date"] = report.failed_cells.get("Fix Date", 0) + 1
                rec = VulnRecord.build(values, None, schema)
            records.append(rec)
    if not records:
        raise SchemaError(f"{path}: zero data rows")
    report.rows = len(records)
    report.unique_cve_ids = len({r.cve_id for r in records if r.cve_id is not None})
    if report.parse_failures:
        log.warning("%s: %d cells could not be parsed and were set missing", path, report.parse_failures)
    if report.duplicates_dropped:
        log.warning("%s: dropped %d exact duplicate rows", path, report.duplicates_dropped)
    return records, report


def load_dataset(path=None, schema: Schema | None = None) -> list[VulnRecord]:
    """Read a dataset CSV (the bundled snapshot when ``path`` is None)."""
    return load_dataset_with_report(path or bundled_dataset_path(), schema)[0]


def write_dataset(records: Sequence[VulnRecord], path, schema: Schema | None = None) -> None:
    schema = schema or load_schema()
    header = schema.names + [c.name for c in schema.auxiliary]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in records:
            row = [_format_cell(rec.values.get(name)) for name in schema.names]
            row.append(_format_cell(rec.fix_date))
            writer.writerow(row)


def snapshot_date(records: Sequence[VulnRecord], schema: Schema | None = None) -> dt.date:
    """Latest date appearing anywhere in the records."""
    schema = schema or load_schema()
    date_cols = [c.name for c in schema.columns if c.type == "date"]
    dates = [r.values[c] for r in records for c in date_cols if r.values.get(c) is not None]
    dates += [r.fix_date for r in records if r.fix_date is not None]
    if not dates:
        raise ValueError("no dates in records")
    return max(dates)


def derive_label(record: VulnRecord, snapshot: dt.date, schema: Schema | None = None) -> SurvivalLabel:
    """Survival label of one record observed up to ``snapshot``.

    * fix indicated with a known date: exact observation of the time to fix;
    * no fix: right-censored at the days elapsed until the snapshot;
    * fix indicated, date unknown: interval ``[1, days until snapshot]``.

    Every bound is floored at one day.
    """
    schema = schema or load_schema()
    detected = record.values.get(schema.detection_column)
    if detected is None:
        raise ValueError(f"{record.cve_id}: missing detection date ({schema.detection_column})")
    window = max(float((snapshot - detected).days), MIN_DAYS)
    if record.event and record.time2fix_days is not None:
        return SurvivalLabel.observed(max(float(record.time2fix_days), MIN_DAYS))
    if not record.event:
        return SurvivalLabel.right_censored(window)
    if window <= MIN_DAYS:
        return SurvivalLabel.observed(MIN_DAYS)
    return SurvivalLabel.interval(MIN_DAYS, window)


def derive_labels(records: Sequence[VulnRecord], snapshot: dt.date | None = None) -> list[SurvivalLabel]:
    snapshot = snapshot or snapshot_date(records)
    return [derive_label(r, snapshot) for r in records]


def _event_of(item) -> bool:
    return bool(item.event)


def split(records: Sequence, ratio: float = 0.8, seed: int = 0, events=None) -> tuple[list, list]:
    """Seeded event-stratified split into ``(train, valid)``.

    Each stratum with two or more members contributes to both sides.
    Singleton strata alternate between train and validation.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    n = len(records)
    if n < 2:
        raise ValueError("need at least two records to split")
    if events is None:
        events = [_event_of(r) for r in records]
    events = np.asarray(events, dtype=bool)
    rng = np.random.default_rng(seed)
    train_idx, valid_idx = [], []
    singles = 0
    for flag in (True, False):
        idx = np.flatnonzero(events == flag)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        if idx.size == 1:
            (train_idx if singles % 2 == 0 else valid_idx).extend(idx.tolist())
            singles += 1
            continue
        k = min(max(int(round(ratio * idx.size)), 1), idx.size - 1)
        train_idx.extend(idx[:k].tolist())
        valid_idx.extend(idx[k:].tolist())
    if not train_idx or not valid_idx:
        raise ValueError("too few records to satisfy stratification")
    train_idx.sort()
    valid_idx.sort()
    return [records[i] for i in train_idx], [records[i] for i in valid_idx]


def _noise(rng, dist: Distribution, size):
    if dist is Distribution.NORMAL:
        return rng.standard_normal(size)
    if dist is Distribution.LOGISTIC:
        return rng.logistic(size=size)
    return -rng.gumbel(size=size)


def synthesize(n: int, d: int, censor_frac: float = 0.2, sigma: float = 0.5, seed: int = 0,
               distribution: Distribution | str = Distribution.NORMAL):
    """Draw data from a known AFT model ``ln y = 3 + <w, x - 1/2> + sigma * Z``.

    Returns ``(matrix, labels, true_tau)`` where ``true_tau`` is the noiseless
    log time of every row. ``censor_frac`` of the rows (chosen at random) are
    right-censored at a uniform fraction of their event time.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    if not 0 <= censor_frac < 1:
        raise ValueError("censor_frac must be in [0, 1)")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    dist = Distribution(distribution)
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    w = np.where(np.arange(d) % 2 == 0, 1.0, -1.0) * rng.uniform(2.0, 4.0, size=d)
    t_clean = np.exp(3.0 + (X - 0.5) @ w)
    true_tau = np.log(t_clean)
    y = t_clean * np.exp(sigma * _noise(rng, dist, n))
    censored = np.zeros(n, dtype=bool)
    censored[rng.choice(n, size=int(round(censor_frac * n)), replace=False)] = True
    frac = 1.0 - rng.random(n)  # (0, 1]
    labels = []
    for i in range(n):
        if censored[i]:
            labels.append(SurvivalLabel.right_censored(y[i] * frac[i]))
        else:
            labels.append(SurvivalLabel.observed(y[i]))
    matrix = FeatureMatrix(X, [f"x{j}" for j in range(d)], ["Synthetic"] * d)
    return matrix, labels, true_tau


def synthesize_records(n: int, censor_frac: float = 0.2, sigma: float = 0.3, seed: int = 0,
                       snapshot: dt.date = dt.date(2023, 2, 21)) -> tuple[list[VulnRecord], np.ndarray]:
    """Dataset records whose time to fix is driven only by the Basic-group columns.

    Each Basic column takes one of six levels drawn with unequal probabilities,
    so frequency encoding keeps levels distinguishable. Returns the records and
    the noiseless log time to fix.
    """
    schema = load_schema()
    rng = np.random.default_rng(seed)
    basic = [c.name for c in schema.group_columns("Basic")]
    probs = np.arange(1, 7, dtype=float)
    probs /= probs.sum()
    effects = rng.uniform(-1.2, 1.2, size=(len(basic), 6))
    levels = np.stack([rng.choice(6, size=n, p=probs) for _ in basic], axis=1)
    tau = 3.5 + effects[np.arange(len(basic)), levels].sum(axis=1)
    days = np.maximum(np.rint(np.exp(tau + sigma * rng.standard_normal(n))), 1).astype(int)
    censored = rng.random(n) < censor_frac
    frac = 1.0 - rng.random(n)
    records = []
    for i in range(n):
        values = {name: None for name in schema.names}
        for j, name in enumerate(basic):
            values[name] = f"{name.lower().replace(' ', '_')}_{levels[i, j]}"
        values["CVE-ID"] = f"CVE-2020-{10000 + i}"
        if censored[i]:
            elapsed = max(int(days[i] * frac[i]), 1)
            values["CVE Published"] = snapshot - dt.timedelta(days=elapsed)
            values["Remediation"] = "Unavailable"
            records.append(VulnRecord.build(values, None, schema))
        else:
            published = snapshot - dt.timedelta(days=int(days[i]) + int(rng.integers(0, 30)))
            values["CVE Published"] = published
            values["Remediation"] = "Official Fix"
            records.append(VulnRecord.build(values, published + dt.timedelta(days=int(days[i])), schema))
    return records, tau
