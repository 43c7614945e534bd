import datetime as dt
import json
import logging
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aftboost.acquisition import (
    CveFeedEntry,
    Reference,
    earliest_fix_date,
    ingest,
    is_hardware,
    parse_feed_page,
    patch_references,
    time_to_fix,
)
from aftboost.dataset import derive_labels, load_dataset
from aftboost.exceptions import DataFaultError

D = dt.date(2023, 1, 1)


def fixture_pages():
    root = Path(str(resources.files("aftboost").joinpath("data").joinpath("fixtures")))
    return sorted(root.glob("feed_page_*.json"))


def entry(cpes=(), refs=(), fix=None):
    return CveFeedEntry("CVE-2023-0001", D, tuple(cpes), tuple(refs), fix)


def test_is_hardware_examples():
    assert is_hardware(entry(["cpe:2.3:h:vendorx:camera:1.0:*:*:*:*:*:*:*"]))
    assert not is_hardware(entry(["cpe:2.3:a:vendorx:app:2.0:*:*:*:*:*:*:*"]))
    assert is_hardware(entry(["cpe:2.3:a:v:app:1:*", "cpe:2.3:h:v:cam:1:*"]))


def test_malformed_cpe_is_skipped(caplog):
    with caplog.at_level(logging.WARNING):
        assert is_hardware(entry(["cpe:broken", "cpe:2.3:h:v:cam:1:*"]))
        assert not is_hardware(entry(["nonsense"]))
    assert "malformed CPE" in caplog.text


def test_patch_references_examples():
    refs = [Reference("u1", ("Patch",)), Reference("u2", ("Exploit",))]
    assert patch_references(entry(refs=refs)) == ["u1"]
    assert patch_references(entry()) == []
    assert patch_references(entry(refs=[Reference("u3", ("Vendor Advisory",))])) == ["u3"]
    assert patch_references(entry(refs=[Reference("u4", ("Third Party Advisory", "Mitigation"))])) == ["u4"]


def test_time_to_fix_examples():
    assert time_to_fix(D, dt.date(2023, 1, 31)) == 30
    assert time_to_fix(D, D) == 0
    with pytest.raises(DataFaultError):
        time_to_fix(dt.date(2023, 1, 31), D)


@given(a=st.dates(), b=st.dates())
def test_time_to_fix_swapped_arguments_error(a, b):
    if a == b:
        assert time_to_fix(a, b) == time_to_fix(b, a) == 0
        return
    early, late = min(a, b), max(a, b)
    assert time_to_fix(early, late) == (late - early).days
    with pytest.raises(DataFaultError):
        time_to_fix(late, early)


def test_earliest_fix_date_is_used(caplog):
    refs = [Reference("a", ("Patch",), dt.date(2023, 3, 1)), Reference("b", ("Patch",), dt.date(2023, 2, 1)),
            Reference("c", ("Exploit",), dt.date(2023, 1, 2))]
    with caplog.at_level(logging.INFO, logger="aftboost.acquisition"):
        assert earliest_fix_date(entry(refs=refs)) == dt.date(2023, 2, 1)
    assert "alternatives" in caplog.text
    assert earliest_fix_date(entry()) is None


def test_unknown_page_layout():
    with pytest.raises(ValueError):
        parse_feed_page({"items": []})


def test_three_page_layouts_parse():
    kinds = set()
    for path in fixture_pages():
        doc = json.loads(path.read_text())
        kinds.add(next(k for k in ("vulnerabilities", "CVE_Items", "entries") if k in doc))
        assert all(isinstance(e.published, dt.date) for e in parse_feed_page(doc))
    assert kinds == {"vulnerabilities", "CVE_Items", "entries"}


def test_ingest_fixture_corpus(tmp_path):
    pages = fixture_pages()
    records, report = ingest(pages, tmp_path / "out.csv")
    assert report.pages == 3 and report.entries == 11 and report.duplicates == 1
    assert report.hardware == len(records) == 8
    assert report.with_patch_refs == 6
    assert report.with_fix_date == 4
    assert report.fix_before_detection == 1 and "CVE-2022-30006" in report.faults[0]
    ids = [r.cve_id for r in records]
    assert ids == sorted(ids)
    again, report2 = ingest(pages)
    assert again == records and report2 == report
    reloaded = load_dataset(tmp_path / "out.csv")
    assert reloaded == records
    labels = derive_labels(reloaded)
    assert sum(lab.event for lab in labels) == 4
