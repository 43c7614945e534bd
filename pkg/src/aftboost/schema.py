"""Column schema of the vulnerability dataset and the numeric feature matrix built from it."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .exceptions import SchemaError

GROUP_ORDER = ("Basic", "VulDB", "NIST", "S2VTitle", "S2VSummary", "Twitter")


@dataclass(frozen=True)
class Column:
    name: str
    type: str  # category | date | number | text
    group: str | None
    aliases: tuple[str, ...] = ()
    feature: str | None = None  # feature name when it differs from the raw column

    @property
    def feature_name(self) -> str:
        return self.feature or self.name


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    auxiliary: tuple[Column, ...]
    leaky_columns: tuple[str, ...]
    detection_column: str
    fix_values: tuple[str, ...]
    date_origin: str
    digest: str

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def all_columns(self) -> tuple[Column, ...]:
        return self.columns + self.auxiliary

    def column(self, name: str) -> Column:
        for c in self.all_columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def group_columns(self, group: str, drop_leaky: bool = False) -> list[Column]:
        if group not in GROUP_ORDER:
            raise SchemaError(f"unknown feature group {group!r}")
        return [
            c for c in self.columns
            if c.group == group and not (drop_leaky and c.name in self.leaky_columns)
        ]

    def resolve_header(self, header: list[str]) -> dict[str, str]:
        """Map file header names to canonical column names.

        Raises :class:`SchemaError` naming the first required column that is
        absent (with its aliases) or the first header entry that is unknown.
        """
        lookup = {}
        for c in self.all_columns:
            lookup[c.name] = c.name
            for a in c.aliases:
                lookup[a] = c.name
        mapping = {}
        for h in header:
            if h.strip() == "":
                continue
            if h not in lookup:
                raise SchemaError(f"unknown column {h!r} in header")
            canonical = lookup[h]
            if canonical in mapping.values():
                raise SchemaError(f"column {canonical!r} appears more than once")
            mapping[h] = canonical
        present = set(mapping.values())
        for c in self.columns:
            if c.name not in present:
                names = " / ".join((c.name,) + c.aliases)
                raise SchemaError(f"missing required column {names}")
        return mapping


@lru_cache(maxsize=None)
def load_schema() -> Schema:
    raw = resources.files("aftboost").joinpath("data/schema.json").read_bytes()
    doc = json.loads(raw)

    def col(d):
        return Column(d["name"], d["type"], d.get("group"), tuple(d.get("aliases", ())), d.get("feature"))

    return Schema(
        columns=tuple(col(d) for d in doc["columns"]),
        auxiliary=tuple(col(d) for d in doc.get("auxiliary_columns", ())),
        leaky_columns=tuple(doc["leaky_columns"]),
        detection_column=doc["detection_column"],
        fix_values=tuple(doc["remediation_fix_values"]),
        date_origin=doc["date_origin"],
        digest=hashlib.sha256(raw).hexdigest(),
    )


@dataclass
class FeatureMatrix:
    """Dense row-major feature table; NaN marks a missing value."""

    values: np.ndarray
    columns: list[str]
    groups: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1 and self.values.size == 0:
            self.values = self.values.reshape(0, len(self.columns))
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise SchemaError(f"values of shape {self.values.shape} do not fit {len(self.columns)} columns")
        if self.groups and len(self.groups) != len(self.columns):
            raise SchemaError("one group tag is needed per column")

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __len__(self) -> int:
        return self.values.shape[0]

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.values[np.asarray(rows, dtype=np.intp)], list(self.columns), list(self.groups))
