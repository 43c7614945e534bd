import csv
import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aftboost.dataset import (
    VulnRecord,
    bundled_dataset_path,
    derive_label,
    derive_labels,
    load_dataset,
    load_dataset_with_report,
    snapshot_date,
    split,
    synthesize,
    synthesize_records,
    write_dataset,
)
from aftboost.exceptions import DataFaultError, SchemaError
from aftboost.metrics import concordance_index
from aftboost.schema import load_schema


def _header():
    with bundled_dataset_path().open(newline="") as fh:
        return next(csv.reader(fh))


def _write(path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def test_bundled_counts():
    records, report = load_dataset_with_report(bundled_dataset_path())
    assert report.rows == len(records) == 1027
    assert report.unique_cve_ids == 1022
    assert report.parse_failures == 0


def test_header_only_file(tmp_path):
    path = tmp_path / "empty.csv"
    _write(path, _header(), [])
    with pytest.raises(SchemaError, match="zero data rows"):
        load_dataset(path)


def test_missing_cve_column_is_named(tmp_path):
    header = [h for h in _header() if h != "CVE-ID"]
    path = tmp_path / "nocve.csv"
    _write(path, header, [["x"] * len(header)])
    with pytest.raises(SchemaError, match="CVEID"):
        load_dataset(path)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_dataset("/nonexistent/file.csv")


def test_aliases_and_bad_cells(tmp_path):
    header = ["CVEID" if h == "CVE-ID" else h for h in _header()]
    records = load_dataset(bundled_dataset_path())[:5]
    rows = []
    with bundled_dataset_path().open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for _, row in zip(range(5), reader):
            rows.append(row)
    cvss = header.index("NVD CVSS BS")
    rows[0][cvss] = "not-a-number"
    rows.append(list(rows[1]))  # exact duplicate
    path = tmp_path / "alias.csv"
    _write(path, header, rows)
    loaded, report = load_dataset_with_report(path)
    assert len(loaded) == 5 and report.duplicates_dropped == 1
    assert report.failed_cells == {"NVD CVSS BS": 1}
    assert loaded[0]["NVD CVSS BS"] is None
    assert [r.cve_id for r in loaded] == [r.cve_id for r in records]


def test_csv_roundtrip(tmp_path, bundled_records):
    path = tmp_path / "copy.csv"
    write_dataset(bundled_records, path)
    again = load_dataset(path)
    assert again == bundled_records


def test_load_derive_split_deterministic(bundled_records):
    again = load_dataset()
    assert again == bundled_records
    snap = snapshot_date(bundled_records)
    assert derive_labels(bundled_records, snap) == derive_labels(again, snap)
    assert split(bundled_records, 0.8, 7) == split(again, 0.8, 7)


def test_bundled_label_mix(bundled_records):
    labels = derive_labels(bundled_records)
    kinds = [lab.kind for lab in labels]
    assert {k: kinds.count(k) for k in set(kinds)} == {"uncensored": 619, "right": 310, "interval": 98}


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_split_is_stratified_partition(bundled_records, seed):
    train, valid = split(bundled_records, 0.8, seed)
    assert len(train) + len(valid) == len(bundled_records)
    assert {id(r) for r in train}.isdisjoint(id(r) for r in valid)
    rate = np.mean([r.event for r in bundled_records])
    assert abs(np.mean([r.event for r in train]) - rate) < 0.01
    assert abs(np.mean([r.event for r in valid]) - rate) < 0.02


def test_split_errors():
    with pytest.raises(ValueError):
        split([1, 2, 3], 1.0, events=[True, False, True])
    with pytest.raises(ValueError):
        split([1], 0.5, events=[True])
    train, valid = split([1, 2], 0.8, events=[True, False])
    assert len(train) == len(valid) == 1


def test_fix_before_detection_is_a_fault():
    schema = load_schema()
    values = {n: None for n in schema.names}
    values["CVE Published"] = dt.date(2022, 5, 1)
    values["Remediation"] = "Official Fix"
    with pytest.raises(DataFaultError):
        VulnRecord.build(values, dt.date(2022, 4, 1), schema)


def _record(published, remediation, fix):
    schema = load_schema()
    values = {n: None for n in schema.names}
    values["CVE-ID"] = "CVE-2021-0001"
    values["CVE Published"] = published
    values["Remediation"] = remediation
    return VulnRecord.build(values, fix, schema)


@settings(max_examples=200, deadline=None)
@given(pub=st.dates(dt.date(2000, 1, 1), dt.date(2023, 1, 1)), delay=st.integers(0, 4000),
       lag=st.integers(0, 4000), remediation=st.sampled_from(["Official Fix", "Not Defined", None]),
       has_fix=st.booleans())
def test_derived_labels_are_valid(pub, delay, lag, remediation, has_fix):
    fix = pub + dt.timedelta(days=delay) if has_fix else None
    snapshot = max(pub, fix or pub) + dt.timedelta(days=lag)
    lab = derive_label(_record(pub, remediation, fix), snapshot)
    assert lab.lower_days >= 1.0
    assert lab.lower_days <= lab.upper_days
    assert lab.event == (lab.lower_days == lab.upper_days)
    if remediation != "Official Fix":
        assert lab.kind == "right"
        assert lab.lower_days == max((snapshot - pub).days, 1)
    elif has_fix:
        assert lab.kind == "uncensored" and lab.lower_days == max(delay, 1)
    else:
        assert lab.upper_days <= max((snapshot - pub).days, 1)


def test_synthesize_self_oracle():
    X, labels, tau = synthesize(2000, 10, sigma=0.5, seed=0)
    assert X.shape == (2000, 10)
    assert sum(not lab.event for lab in labels) == 400
    assert concordance_index(labels, np.exp(tau)).c_index >= 0.9


def test_synthesize_records_signal():
    records, tau = synthesize_records(500, seed=3)
    labels = derive_labels(records, dt.date(2023, 2, 21))
    assert len(records) == 500
    assert concordance_index(labels, np.exp(tau)).c_index >= 0.85
    assert all(math.isfinite(lab.lower_days) for lab in labels)


def test_derive_label_examples():
    snap = dt.date(2023, 6, 1)
    fixed = _record(dt.date(2023, 1, 1), "Official Fix", dt.date(2023, 1, 31))
    lab = derive_label(fixed, snap)
    assert (lab.event, lab.lower_days, lab.upper_days) == (True, 30.0, 30.0)
    open_ = _record(snap - dt.timedelta(days=100), "Not Defined", None)
    lab = derive_label(open_, snap)
    assert (lab.event, lab.lower_days, lab.upper_days) == (False, 100.0, math.inf)
    same_day = _record(dt.date(2023, 1, 1), "Official Fix", dt.date(2023, 1, 1))
    lab = derive_label(same_day, snap)
    assert (lab.event, lab.lower_days, lab.upper_days) == (True, 1.0, 1.0)
    unknown = _record(dt.date(2023, 5, 1), "Official Fix", None)
    lab = derive_label(unknown, snap)
    assert (lab.event, lab.lower_days, lab.upper_days) == (False, 1.0, 31.0)
    with pytest.raises(ValueError):
        derive_label(_record(None, "Official Fix", None), snap)


def test_bundled_split_sizes(bundled_records):
    train, valid = split(bundled_records, 0.8, 7)
    assert abs(len(train) - 821) <= 1 and abs(len(valid) - 206) <= 1
    assert any(r.event for r in train) and any(r.event for r in valid)


def test_synthesize_edge_cases():
    _, labels, _ = synthesize(300, 3, censor_frac=0.0, seed=1)
    assert all(lab.event for lab in labels)
    _, labels, tau = synthesize(300, 3, censor_frac=0.0, sigma=0.0, seed=1)
    assert np.allclose(np.log([lab.lower_days for lab in labels]), tau, rtol=0, atol=1e-12)
    for bad in (dict(censor_frac=1.0), dict(censor_frac=-0.1), dict(sigma=-1.0)):
        with pytest.raises(ValueError):
            synthesize(10, 2, **bad)
    with pytest.raises(ValueError):
        synthesize(1, 2)
