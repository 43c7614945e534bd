import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aftboost.exceptions import SchemaError
from aftboost.features import (
    OPTIONAL_GROUPS,
    EncoderBundle,
    FeatureAssembler,
    FeatureGroup,
    FrequencyEncoder,
    HashingTextEmbedder,
    assemble_matrix,
    embed_text_sum,
    fit_frequency_encoder,
)
from aftboost.dataset import split

from oracles import all_subsets


@pytest.fixture(scope="module")
def encoders(bundled_records):
    return EncoderBundle.fit(bundled_records)


def test_frequency_encoder_counts():
    enc = fit_frequency_encoder(["a", "b", "a", None, "a"])
    assert enc.encode("a") == 3.0
    assert enc.encode("b") == 1.0
    assert enc.encode("zzz") == 0.0
    assert math.isnan(enc.encode(None))
    out = FrequencyEncoder().fit(np.array(["x", "y", "x"], dtype=object)).transform(["x", "q"])
    assert out.tolist() == [2.0, 0.0]


def test_cve_id_encoder_has_one_key_per_distinct_id(bundled_records, encoders):
    assert len(encoders["CVE-ID"].mapping_) == 1022
    assert len(bundled_records) == 1027


def test_column_counts(bundled_records, encoders):
    basic = assemble_matrix(bundled_records, [FeatureGroup.BASIC], encoders)
    assert basic.shape == (1027, 5)
    full = assemble_matrix(bundled_records, list(FeatureGroup), encoders)
    assert full.shape == (1027, 46)
    empty = assemble_matrix([], ["Basic"], encoders)
    assert empty.shape == (0, 5)


def test_leaky_columns_can_be_dropped(bundled_records, encoders):
    kept = assemble_matrix(bundled_records[:10], list(FeatureGroup), encoders)
    dropped = assemble_matrix(bundled_records[:10], list(FeatureGroup), encoders, drop_leaky=True)
    assert dropped.shape[1] == kept.shape[1] - 3
    assert "Remediation" in kept.columns and "Remediation" not in dropped.columns


def test_basic_group_is_required(bundled_records, encoders):
    with pytest.raises(SchemaError):
        assemble_matrix(bundled_records[:3], ["VulDB"], encoders)
    with pytest.raises(SchemaError):
        assemble_matrix(bundled_records[:3], ["Basic"], EncoderBundle())


def test_group_subsets_are_column_prefixes(bundled_records, encoders):
    recs = bundled_records[:50]
    full = assemble_matrix(recs, list(FeatureGroup), encoders)
    for subset in all_subsets(OPTIONAL_GROUPS):
        m = assemble_matrix(recs, (FeatureGroup.BASIC,) + subset, encoders)
        assert m.columns[:5] == full.columns[:5]
        idx = [full.columns.index(c) for c in m.columns]
        assert idx == sorted(idx)
        assert np.array_equal(m.values, full.values[:, idx], equal_nan=True)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_row_permutation_equivariance(bundled_records, encoders, seed):
    recs = bundled_records[:80]
    perm = np.random.default_rng(seed).permutation(len(recs))
    a = assemble_matrix(recs, list(FeatureGroup), encoders)
    b = assemble_matrix([recs[i] for i in perm], list(FeatureGroup), encoders)
    assert np.array_equal(a.values[perm], b.values, equal_nan=True)


@pytest.mark.parametrize("seed", [0, 7, 13])
def test_split_encoders_never_zero_on_their_split(bundled_records, seed):
    train, _ = split(bundled_records, 0.8, seed)
    enc = EncoderBundle.fit(train)
    m = assemble_matrix(train, list(FeatureGroup), enc)
    cat = [i for i, g in enumerate(m.columns) if g in enc]
    assert len(cat) == len(enc)
    block = m.values[:, cat]
    assert not (block == 0).any()


def test_text_embedding():
    assert math.isnan(embed_text_sum(None))
    assert embed_text_sum("") == 0.0
    a = embed_text_sum("Buffer overflow in router firmware")
    assert a == embed_text_sum("buffer OVERFLOW in router firmware")
    assert a == embed_text_sum("firmware router in overflow buffer")
    assert a != embed_text_sum("cross site scripting")
    emb = HashingTextEmbedder(dim=8, seed=3)
    v = emb.token_vector("router")
    assert v.shape == (8,) and np.linalg.norm(v) == pytest.approx(1.0)
    assert embed_text_sum("abc", embedder=len) == 3.0


def test_encoder_bundle_roundtrip(tmp_path, bundled_records, encoders):
    encoders.save(tmp_path / "enc.json")
    loaded = EncoderBundle.load(tmp_path / "enc.json")
    a = assemble_matrix(bundled_records[:40], list(FeatureGroup), encoders)
    b = assemble_matrix(bundled_records[:40], list(FeatureGroup), loaded)
    assert np.array_equal(a.values, b.values, equal_nan=True)


def test_feature_assembler(bundled_records):
    fa = FeatureAssembler(groups=("Basic", "NIST"))
    m = fa.fit(bundled_records[:100]).transform(bundled_records[100:120])
    assert m.shape == (20, 10)
    assert fa.get_params() == {"groups": ("Basic", "NIST"), "drop_leaky": False}


def test_encoder_spec_examples():
    enc = fit_frequency_encoder(["a", "a", "b"])
    assert enc.mapping_ == {"a": 2, "b": 1}
    empty = fit_frequency_encoder([])
    assert empty.mapping_ == {} and empty.encode("a") == 0.0
    assert embed_text_sum("buffer overflow") == embed_text_sum("overflow buffer")
