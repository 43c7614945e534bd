"""Ingest recorded CVE-feed JSON pages into dataset rows.

Keeps hardware CVEs only (CPE part code ``h``), collects patch-labelled
references and computes the time to fix from the CVE publication date and the
earliest recorded fix date. Nothing here touches the network; fix dates come
from a ``fix_date`` field in the fixtures.

Three page layouts are understood: the NVD 2.0 API (``vulnerabilities``), the
legacy 1.1 feed (``CVE_Items``) and a flat ``entries`` list of
``{id, published, cpes, references, fix_date}`` objects.
"""
from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .dataset import VulnRecord, write_dataset
from .exceptions import DataFaultError
from .schema import load_schema

log = logging.getLogger(__name__)

PATCH_TAGS = frozenset({"Patch", "Vendor Advisory", "Third Party Advisory"})


@dataclass(frozen=True)
class Reference:
    url: str
    tags: tuple[str, ...] = ()
    fix_date: dt.date | None = None


@dataclass(frozen=True)
class CveFeedEntry:
    cve_id: str
    published: dt.date
    cpes: tuple[str, ...] = ()
    references: tuple[Reference, ...] = ()
    fix_date: dt.date | None = None
    description: str | None = None
    cvss: float | None = None
    cwe: str | None = None


def _date(value) -> dt.date | None:
    if value in (None, ""):
        return None
    return dt.date.fromisoformat(str(value)[:10])


def cpe_part(uri: str) -> str | None:
    """Part code of a CPE 2.3 URI, or None when the URI is malformed."""
    parts = uri.split(":")
    if len(parts) < 5 or parts[0] != "cpe" or parts[2] not in {"a", "h", "o", "s", "*", "-"}:
        return None
    return parts[2]


def is_hardware(entry: CveFeedEntry) -> bool:
    found = False
    for uri in entry.cpes:
        part = cpe_part(uri)
        if part is None:
            log.warning("%s: skipping malformed CPE %r", entry.cve_id, uri)
            continue
        found = found or part == "h"
    return found


def patch_references(entry: CveFeedEntry) -> list[str]:
    return [ref.url for ref in entry.references if PATCH_TAGS.intersection(ref.tags)]


def time_to_fix(detected: dt.date, fix_published: dt.date) -> int:
    """Whole days from detection to fix publication."""
    days = (fix_published - detected).days
    if days < 0:
        raise DataFaultError(f"fix published {fix_published} before detection {detected}")
    return days


def earliest_fix_date(entry: CveFeedEntry) -> dt.date | None:
    patch_urls = set(patch_references(entry))
    dates = sorted(
        (ref.fix_date, ref.url) for ref in entry.references
        if ref.fix_date is not None and ref.url in patch_urls
    )
    if entry.fix_date is not None:
        dates.insert(0, (entry.fix_date, "<entry>"))
        dates.sort()
    if len(dates) > 1:
        log.info("%s: using fix date %s; alternatives %s", entry.cve_id, dates[0][0],
                 [str(d) for d, _ in dates[1:]])
    return dates[0][0] if dates else None


def _nvd2_entry(item: dict) -> CveFeedEntry:
    cve = item["cve"]
    cpes = [m["criteria"] for conf in cve.get("configurations", [])
            for node in conf.get("nodes", []) for m in node.get("cpeMatch", []) if "criteria" in m]
    refs = tuple(Reference(r["url"], tuple(r.get("tags", ())), _date(r.get("fix_date")))
                 for r in cve.get("references", []))
    desc = next((d["value"] for d in cve.get("descriptions", []) if d.get("lang") == "en"), None)
    cvss = None
    for key in ("cvssMetricV31", "cvssMetricV30", "cvssMetricV2"):
        if cve.get("metrics", {}).get(key):
            cvss = float(cve["metrics"][key][0]["cvssData"]["baseScore"])
            break
    cwe = None
    for w in cve.get("weaknesses", []):
        for d in w.get("description", []):
            if d.get("value", "").startswith("CWE-"):
                cwe = d["value"]
                break
        if cwe:
            break
    return CveFeedEntry(cve["id"], _date(cve["published"]), tuple(cpes), refs,
                        _date(cve.get("fix_date") or item.get("fix_date")), desc, cvss, cwe)


def _nvd11_entry(item: dict) -> CveFeedEntry:
    cve = item["cve"]

    def walk(nodes):
        for node in nodes:
            for m in node.get("cpe_match", []):
                if "cpe23Uri" in m:
                    yield m["cpe23Uri"]
            yield from walk(node.get("children", []))

    cpes = list(walk(item.get("configurations", {}).get("nodes", [])))
    refs = tuple(Reference(r["url"], tuple(r.get("tags", ())), _date(r.get("fix_date")))
                 for r in cve.get("references", {}).get("reference_data", []))
    desc = next((d["value"] for d in cve.get("description", {}).get("description_data", [])
                 if d.get("lang") == "en"), None)
    impact = item.get("impact", {})
    cvss = None
    if "baseMetricV3" in impact:
        cvss = float(impact["baseMetricV3"]["cvssV3"]["baseScore"])
    elif "baseMetricV2" in impact:
        cvss = float(impact["baseMetricV2"]["cvssV2"]["baseScore"])
    return CveFeedEntry(cve["CVE_data_meta"]["ID"], _date(item["publishedDate"]), tuple(cpes), refs,
                        _date(item.get("fix_date")), desc, cvss, None)


def _flat_entry(item: dict) -> CveFeedEntry:
    refs = tuple(Reference(r["url"], tuple(r.get("tags", ())), _date(r.get("fix_date")))
                 for r in item.get("references", []))
    return CveFeedEntry(item["id"], _date(item["published"]), tuple(item.get("cpes", ())), refs,
                        _date(item.get("fix_date")), item.get("description"), item.get("cvss"), item.get("cwe"))


def parse_feed_page(doc: dict) -> list[CveFeedEntry]:
    if "vulnerabilities" in doc:
        return [_nvd2_entry(i) for i in doc["vulnerabilities"]]
    if "CVE_Items" in doc:
        return [_nvd11_entry(i) for i in doc["CVE_Items"]]
    if "entries" in doc:
        return [_flat_entry(i) for i in doc["entries"]]
    raise ValueError("unrecognised feed page: expected 'vulnerabilities', 'CVE_Items' or 'entries'")


@dataclass
class IngestReport:
    pages: int = 0
    entries: int = 0
    duplicates: int = 0
    hardware: int = 0
    with_patch_refs: int = 0
    with_fix_date: int = 0
    fix_before_detection: int = 0
    rows_written: int = 0
    faults: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def entry_to_record(entry: CveFeedEntry, report: IngestReport | None = None) -> VulnRecord:
    schema = load_schema()
    values = {name: None for name in schema.names}
    values["CVE-ID"] = entry.cve_id
    values["CVE Published"] = entry.published
    values["NVD CVSS BS"] = entry.cvss
    values["CWE-ID"] = entry.cwe
    values["Summary"] = entry.description
    vendors = {uri.split(":")[3] for uri in entry.cpes if cpe_part(uri) == "h"}
    products = sorted(uri.split(":")[4] for uri in entry.cpes if cpe_part(uri) == "h")
    values["Vendor"] = ";".join(sorted(vendors)) or None
    values["Device Name"] = products[0] if products else None
    values["Affected Products"] = ";".join(products) or None
    patches = patch_references(entry)
    fix = earliest_fix_date(entry)
    if fix is not None:
        try:
            time_to_fix(entry.published, fix)
        except DataFaultError as exc:
            if report is not None:
                report.fix_before_detection += 1
                report.faults.append(f"{entry.cve_id}: {exc}")
            fix = None
    values["Remediation"] = "Official Fix" if patches else "Not Defined"
    return VulnRecord.build(values, fix, schema)


def ingest(pages: Iterable, out_csv=None) -> tuple[list[VulnRecord], IngestReport]:
    """Turn feed pages (paths or parsed documents) into dataset records.

    Output rows are ordered by CVE id; an id seen on several pages is kept
    once (first occurrence).
    """
    report = IngestReport()
    entries = {}
    for page in pages:
        doc = json.loads(Path(page).read_text()) if isinstance(page, (str, Path)) else page
        report.pages += 1
        for entry in parse_feed_page(doc):
            report.entries += 1
            if entry.cve_id in entries:
                report.duplicates += 1
                continue
            entries[entry.cve_id] = entry
    records = []
    for cve_id in sorted(entries):
        entry = entries[cve_id]
        if not is_hardware(entry):
            continue
        report.hardware += 1
        if patch_references(entry):
            report.with_patch_refs += 1
        rec = entry_to_record(entry, report)
        if rec.fix_date is not None:
            report.with_fix_date += 1
        records.append(rec)
    report.rows_written = len(records)
    if out_csv is not None:
        write_dataset(records, out_csv)
    return records, report
