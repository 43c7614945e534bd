"""Regenerate the bundled stand-in vulnerability dataset.

The published time-to-fix dataset is not redistributed here. This script
writes a deterministic synthetic table with the same 46-column layout and the
same row/identifier counts (1,027 rows, 1,022 distinct CVE ids), with a
planted dependence of time to fix on vendor, risk, CVSS, exploit status and
tweet volume.

Usage:
    python scripts/make_standin_dataset.py [output.csv]
"""
import datetime as dt
import sys
from pathlib import Path

import numpy as np

from aftboost.dataset import VulnRecord, bundled_dataset_path, write_dataset
from aftboost.schema import load_schema

N_ROWS = 1027
N_UNIQUE = 1022
SNAPSHOT = dt.date(2023, 2, 21)
SEED = 20230221

VULN_TYPES = ["buffer overflow", "cross site scripting", "command injection", "improper authentication",
              "hard-coded credentials", "path traversal", "denial of service", "information disclosure",
              "cross-site request forgery", "memory corruption", "sql injection", "missing encryption",
              "improper access control", "use after free", "null pointer dereference"]
DEVICE_KINDS = ["router", "ip camera", "nas", "smart plug", "printer", "plc", "access point", "dvr",
                "switch", "smart lock", "thermostat", "gateway", "firewall", "modem", "hmi panel"]
IMPACTS = ["confidentiality", "integrity", "availability", "confidentiality, integrity, availability"]
CLASSES = ["Memory Corruption", "Injection", "Authentication", "Access Control", "Cryptography",
           "Resource Management", "Input Validation", "Information Exposure"]
ATTACKS = [f"T{1000 + k}" for k in range(21)]
REMEDIATION_OTHER = ["Temporary Fix", "Workaround", "Unavailable", "Not Defined"]
PRICES = ["$0-$5k", "$5k-$25k", "$25k-$100k", "$100k and more"]


def main(out: Path):
    schema = load_schema()
    rng = np.random.default_rng(SEED)
    vendors = [f"vendor{k:02d}" for k in range(77)]
    vendor_effect = rng.normal(0.0, 0.7, size=len(vendors))
    vendor_p = rng.dirichlet(np.full(len(vendors), 0.6))
    devices = {v: [f"{v} {DEVICE_KINDS[k % len(DEVICE_KINDS)]} {m}" for k, m in
                   enumerate(rng.choice(["x1", "pro", "lite", "ac", "4k", "plus"], size=6))] for v in vendors}

    cve_years = rng.integers(2016, 2023, size=N_UNIQUE)
    cve_ids = [f"CVE-{y}-{n}" for y, n in zip(cve_years, rng.choice(np.arange(1000, 48000), N_UNIQUE, replace=False))]
    # five CVEs affect a second device and appear twice
    row_cves = cve_ids + list(rng.choice(cve_ids, size=N_ROWS - N_UNIQUE, replace=False))

    records = []
    for i, cve in enumerate(row_cves):
        year = int(cve.split("-")[1])
        vi = int(rng.choice(len(vendors), p=vendor_p))
        vendor = vendors[vi]
        device = str(rng.choice(devices[vendor]))
        vtype = str(rng.choice(VULN_TYPES))
        risk = str(rng.choice(["Low", "Medium", "High"], p=[0.2, 0.5, 0.3]))
        cvss = float(np.clip(np.round(rng.normal({"Low": 3.8, "Medium": 6.0, "High": 8.3}[risk], 0.8), 1), 0.0, 10.0))
        public = rng.random() < 0.35
        tweets = float(rng.poisson(2.0) if rng.random() < 0.4 else 0)
        published = dt.date(year, 1, 1) + dt.timedelta(days=int(rng.integers(0, 365)))
        if published > SNAPSHOT - dt.timedelta(days=30):
            published = SNAPSHOT - dt.timedelta(days=30 + int(rng.integers(0, 200)))

        log_t = (3.6 + vendor_effect[vi] + {"Low": 0.45, "Medium": 0.0, "High": -0.5}[risk]
                 - 0.12 * (cvss - 6.0) - 0.35 * public - 0.08 * tweets + 0.8 * rng.standard_normal())
        t2f = int(np.rint(np.exp(log_t)))
        if rng.random() < 0.08:
            t2f = 0  # published together with the fix

        official = rng.random() < 0.72
        fix_date = None
        if official:
            if rng.random() < 0.85:
                fix_date = published + dt.timedelta(days=t2f)
                if fix_date > SNAPSHOT:
                    official, fix_date = False, None
        remediation = "Official Fix" if official else str(rng.choice(REMEDIATION_OTHER))

        found = published - dt.timedelta(days=int(rng.integers(0, 120)))
        reserved = found + dt.timedelta(days=int(rng.integers(0, 30)))
        assigned = reserved if rng.random() < 0.7 else None
        created = published + dt.timedelta(days=int(rng.integers(0, 10)))
        updated = min(created + dt.timedelta(days=int(rng.integers(0, 900))), SNAPSHOT)
        advisory = published + dt.timedelta(days=int(rng.integers(-20, 20))) if rng.random() < 0.6 else None
        epss = float(np.round(rng.beta(0.6, 8.0), 5))
        values = {name: None for name in schema.names}
        values.update({
            "Vulnerability": vtype,
            "Vendor": vendor,
            "Device Name": device,
            "Affected Products": f"{device} up to {rng.integers(1, 5)}.{rng.integers(0, 10)}",
            "Version": f"{rng.integers(1, 5)}.{rng.integers(0, 10)}.{rng.integers(0, 30)}",
            "Affected Models": device if rng.random() < 0.5 else None,
            "Impact": str(rng.choice(IMPACTS)),
            "Exploit Existence": "proof-of-concept" if public else "not defined",
            "Countermeasures": "upgrade" if official else str(rng.choice(["workaround", "no countermeasure"])),
            "Sources": f"https://vuldb.com/?source.{rng.integers(1, 700)}",
            "Risk": risk,
            "Class": str(rng.choice(CLASSES)),
            "Attack": str(rng.choice(ATTACKS)) if rng.random() < 0.8 else None,
            "Vulnerability Found": found if rng.random() < 0.3 else None,
            "Advisory Disclosed": advisory,
            "CVE Reserved": reserved,
            "NVD Disclosed": published + dt.timedelta(days=int(rng.integers(0, 5))),
            "Vuldb Entry Created": created,
            "Vuldb Entry Updated": updated,
            "Advisory Date": advisory,
            "Advisory Confirmation": str(rng.choice(["Confirmed", "Not Defined", "Uncorroborated"])),
            "Exploit Availability": "1" if public else str(rng.choice(["0", "NA"])),
            "Exploit Publicity": "Public" if public else str(rng.choice(["Private", "NA"])),
            "Exploit Exploitability": str(rng.choice(["Proof-of-Concept", "Unproven", "High", "Functional"])),
            "Price0day": str(rng.choice(PRICES)),
            "PriceToday": str(rng.choice(PRICES)),
            "Epss Score": epss,
            "Epss Percentile": float(np.round(min(1.0, epss * 4.0 + rng.uniform(0, 0.2)), 5)),
            "Remediation": remediation,
            "Countermeasures Name": "Upgrade" if official else str(rng.choice(["Workaround", "Disable", "no known"])),
            "Upgrade Versions": f"{rng.integers(1, 6)}.{rng.integers(0, 10)}.{rng.integers(0, 40)}" if official else None,
            "Vuldb CVSS BS": float(np.clip(np.round(cvss + rng.normal(0, 0.5), 1), 0.0, 10.0)),
            "CVE-ID": cve,
            "CVE Assigned": assigned,
            "CVE Published": published,
            "NVD CVSS BS": cvss if rng.random() < 0.95 else None,
            "CWE-ID": f"CWE-{rng.choice([20, 22, 78, 79, 119, 120, 200, 284, 287, 306, 352, 400, 476, 787, 798])}",
            "Title": f"{vendor} {device} {vtype} vulnerability",
            "Summary": (f"A {risk.lower()} risk {vtype} was found in {device} by {vendor}. "
                        f"The manipulation leads to {rng.choice(IMPACTS)} impact."),
            "Tweets": tweets if tweets else None,
            "Date First Tweet": published + dt.timedelta(days=int(rng.integers(0, 60))) if tweets else None,
            "Retweet Average": float(np.round(rng.gamma(1.0, 2.0), 2)) if tweets else None,
            "Reply Average": float(np.round(rng.gamma(0.5, 1.0), 2)) if tweets else None,
            "Like Average": float(np.round(rng.gamma(1.5, 3.0), 2)) if tweets else None,
            "Quote Average": float(np.round(rng.gamma(0.3, 1.0), 2)) if tweets else None,
            "Impression Average": float(np.round(rng.gamma(2.0, 50.0), 1)) if tweets else None,
        })
        if i == 0:
            values["Vuldb Entry Updated"] = SNAPSHOT
        records.append(VulnRecord.build(values, fix_date, schema))

    write_dataset(records, out)
    print(f"wrote {len(records)} rows ({len(set(row_cves))} distinct CVE ids) to {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else bundled_dataset_path())
