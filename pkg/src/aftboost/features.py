"""Feature engineering: frequency encoding, date deltas, text-vector sums, group assembly."""
from __future__ import annotations

import datetime as dt
import enum
import hashlib
import json
import math
import re
from collections import Counter
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ModelFormatError, SchemaError
from .schema import GROUP_ORDER, FeatureMatrix, Schema, load_schema

EMBED_DIM = 64
_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class FeatureGroup(str, enum.Enum):
    BASIC = "Basic"
    VULDB = "VulDB"
    NIST = "NIST"
    S2V_TITLE = "S2VTitle"
    S2V_SUMMARY = "S2VSummary"
    TWITTER = "Twitter"

    def columns(self, drop_leaky: bool = False, schema: Schema | None = None) -> list[str]:
        schema = schema or load_schema()
        return [c.feature_name for c in schema.group_columns(self.value, drop_leaky)]


OPTIONAL_GROUPS = tuple(g for g in FeatureGroup if g is not FeatureGroup.BASIC)


def _is_missing(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


class FrequencyEncoder(TransformerMixin, BaseEstimator):
    """Replace each category by how often it occurred in the fitting data.

    Unseen categories encode to 0; missing values stay missing (NaN).
    """

    def fit(self, X, y=None):
        self.mapping_ = dict(Counter(str(v) for v in _flatten(X) if not _is_missing(v)))
        return self

    def encode(self, value) -> float:
        if _is_missing(value):
            return math.nan
        return float(self.mapping_.get(str(value), 0))

    def transform(self, X):
        return np.array([self.encode(v) for v in _flatten(X)], dtype=float)


def _flatten(X) -> list:
    if isinstance(X, np.ndarray):
        return X.ravel().tolist()
    if hasattr(X, "to_numpy"):
        return X.to_numpy().ravel().tolist()
    return list(X)


def fit_frequency_encoder(column: Iterable) -> FrequencyEncoder:
    return FrequencyEncoder().fit(list(column))


def encode(encoder: FrequencyEncoder, value) -> float:
    return encoder.encode(value)


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


class HashingTextEmbedder:
    """Stand-in sentence embedding: every token gets a fixed pseudo-random unit vector.

    The vector is seeded from a hash of the token, so results are stable across
    processes and platforms.
    """

    def __init__(self, dim: int = EMBED_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed

    @lru_cache(maxsize=65536)
    def token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(f"{self.seed}:{token}".encode(), digest_size=8).digest()
        v = np.random.default_rng(int.from_bytes(digest, "little")).standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def __call__(self, text: str) -> float:
        # fsum is exactly rounded, hence independent of token order
        return math.fsum(float(self.token_vector(t).sum()) for t in tokenize(text))


_DEFAULT_EMBEDDER = HashingTextEmbedder()


def embed_text_sum(text: str | None, embedder: Callable[[str], float] | None = None) -> float:
    """Collapse a text into one number: the component sum of its summed token vectors.

    Any callable mapping text to a float can replace the default hashing
    embedder (e.g. a pretrained sentence model followed by a sum).
    """
    if _is_missing(text):
        return math.nan
    return float((embedder or _DEFAULT_EMBEDDER)(text))


def date_to_days(value: dt.date | None, origin: dt.date) -> float:
    if value is None:
        return math.nan
    return float((value - origin).days)


class EncoderBundle(dict):
    """Fitted frequency encoders keyed by column name."""

    @classmethod
    def fit(cls, records: Sequence, columns: Iterable[str] | None = None) -> "EncoderBundle":
        schema = load_schema()
        if columns is None:
            columns = [c.name for c in schema.columns if c.type == "category"]
        return cls({name: fit_frequency_encoder(r.values.get(name) for r in records) for name in columns})

    def to_json(self) -> str:
        return json.dumps({k: v.mapping_ for k, v in self.items()}, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EncoderBundle":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"encoder bundle is not JSON: {exc}") from exc
        bundle = cls()
        for name, mapping in doc.items():
            enc = FrequencyEncoder()
            enc.mapping_ = {str(k): int(v) for k, v in mapping.items()}
            bundle[name] = enc
        return bundle

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "EncoderBundle":
        return cls.from_json(Path(path).read_text())


def _normalize_groups(groups) -> list[FeatureGroup]:
    chosen = {FeatureGroup(g) for g in groups}
    if FeatureGroup.BASIC not in chosen:
        raise SchemaError("the Basic group must always be included")
    return [g for g in FeatureGroup if g in chosen]


def assemble_matrix(records: Sequence, groups, encoders: EncoderBundle, drop_leaky: bool = False,
                    embedder: Callable[[str], float] | None = None) -> FeatureMatrix:
    """Numeric matrix for ``records`` restricted to the chosen feature groups.

    Columns follow the fixed group order. Categories are frequency-encoded
    with ``encoders`` (fitted on the training split), dates become whole days
    since the schema's origin, texts become :func:`embed_text_sum` values and
    numbers pass through.
    """
    schema = load_schema()
    origin = dt.date.fromisoformat(schema.date_origin)
    known = set(schema.names)
    cols = []
    for g in _normalize_groups(groups):
        cols.extend(schema.group_columns(g.value, drop_leaky))
    for c in cols:
        if c.type == "category" and c.name not in encoders:
            raise SchemaError(f"encoder bundle has no encoder for column {c.name!r}")
    for r in records:
        extra = set(r.values) - known
        if extra:
            raise SchemaError(f"record {r.cve_id} has unknown columns {sorted(extra)}")

    values = np.full((len(records), len(cols)), np.nan)
    for j, c in enumerate(cols):
        raw = [r.values.get(c.name) for r in records]
        if c.type == "category":
            enc = encoders[c.name]
            values[:, j] = [enc.encode(v) for v in raw]
        elif c.type == "date":
            values[:, j] = [date_to_days(v, origin) for v in raw]
        elif c.type == "text":
            values[:, j] = [embed_text_sum(v, embedder) for v in raw]
        else:
            values[:, j] = [math.nan if v is None else float(v) for v in raw]
    return FeatureMatrix(values, [c.feature_name for c in cols], [c.group for c in cols])


class FeatureAssembler(TransformerMixin, BaseEstimator):
    """Fit encoders on training records and turn record lists into feature matrices."""

    def __init__(self, groups=GROUP_ORDER, drop_leaky=False):
        self.groups = groups
        self.drop_leaky = drop_leaky

    def fit(self, records, y=None):
        self.encoders_ = EncoderBundle.fit(records)
        return self

    def transform(self, records) -> FeatureMatrix:
        return assemble_matrix(records, self.groups, self.encoders_, self.drop_leaky)
