from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ocon.dataset import FeatureRecord
from ocon.errors import BadMagic, ChecksumMismatch, EmptyColumn, NonPositiveInput
from ocon.features import (
    FeatureMatrix, MinMaxParams, VariantKind, build_variant, formant_ratio, load_container,
    min_max_fit_transform, pmd, save_container, skewness, zscore_fit_transform,
)


def test_formant_ratio():
    assert formant_ratio(270, 135) == 2.0
    assert formant_ratio(135, 135) == 1.0
    with pytest.raises(NonPositiveInput):
        formant_ratio(500, 0)


@given(st.floats(1, 5000), st.floats(1, 500), st.floats(0.01, 100))
def test_ratio_scale_invariant(f, f0, a):
    assert formant_ratio(a * f, a * f0) == pytest.approx(formant_ratio(f, f0), rel=1e-12)


def one_record():
    formants = [0.0] * 12
    formants[2], formants[6], formants[10] = 270.0, 2290.0, 3010.0
    others = [i for i in range(12) if i not in (2, 6, 10)]
    for i in others:
        formants[i] = 100.0 + i
    return FeatureRecord.from_values("m01iy", 135.0, formants)


def test_ss3_row():
    m = build_variant([one_record()], VariantKind.SS3)
    assert m.values.shape == (1, 3)
    np.testing.assert_array_equal(m.values[0], [270 / 135, 2290 / 135, 3010 / 135])
    assert m.values[0, 1] == pytest.approx(16.96296296, abs=1e-8)
    assert m.values[0, 2] == pytest.approx(22.2962963, abs=1e-7)


def test_dimensions_and_columns():
    r = one_record()
    for kind, dim in [(VariantKind.SS3, 3), (VariantKind.SS3_F0, 4), (VariantKind.TT12, 12),
                      (VariantKind.TT12_F0, 13)]:
        m = build_variant([r], kind)
        assert m.values.shape == (1, dim) == (1, kind.dim) and len(kind.columns) == dim
    tt = build_variant([r], VariantKind.TT12_F0)
    assert tt.values[0, -1] == 135.0
    assert VariantKind.TT12.columns[:4] == ("F1@10/F0", "F1@50/F0", "F1@SS/F0", "F1@80/F0")
    # formant-major nesting: column j is formant tuple entry j
    np.testing.assert_array_equal(tt.values[0, :12], np.array(r.formants) / 135.0)


def test_nonpositive_propagates_identity():
    r = FeatureRecord.from_values("m01ae", 0.0, [100.0] * 12)
    with pytest.raises(NonPositiveInput, match="m01ae"):
        build_variant([r], VariantKind.SS3)


def matrix(values):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    return FeatureMatrix(values, VariantKind.SS3, np.zeros(n, int), np.zeros(n, int), [f"m{i:02d}ae" for i in range(n)])


def test_min_max_examples():
    m = matrix([[1, 2, 0], [3, 2, 5], [5, 2, 10]])
    scaled, params = min_max_fit_transform(m)
    np.testing.assert_array_equal(scaled.values[:, 0], [0, 0.5, 1])
    np.testing.assert_array_equal(scaled.values[:, 1], [0, 0, 0])
    assert params.apply(m.values).tobytes() == scaled.values.tobytes()


def test_min_max_fit_rows():
    m = matrix([[0.0] * 3, [1.0] * 3, [4.0] * 3])
    scaled, params = min_max_fit_transform(m, fit_rows=[0, 1])
    assert scaled.values[2, 0] == 4.0  # unseen rows are not clipped
    np.testing.assert_array_equal(params.maxs, [1, 1, 1])


@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 30), st.just(3)),
                  elements=st.floats(-1e6, 1e6)))
def test_min_max_range_and_idempotence(values):
    scaled, _ = min_max_fit_transform(matrix(values))
    assert np.all(scaled.values >= 0) and np.all(scaled.values <= 1 + 1e-12)
    identity = MinMaxParams(np.zeros(3), np.ones(3))
    assert identity.apply(scaled.values).tobytes() == scaled.values.tobytes()


def test_variant_scaled_in_unit_interval(records):
    for kind in VariantKind:
        scaled, _ = min_max_fit_transform(build_variant(records, kind))
        assert scaled.n_rows == len(records)
        assert scaled.values.min() == 0.0 and scaled.values.max() == 1.0


def test_zscore(records):
    m, _ = zscore_fit_transform(build_variant(records, VariantKind.SS3))
    np.testing.assert_allclose(m.values.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(m.values.std(axis=0), 1, atol=1e-12)


def test_pmd():
    h = pmd([0, 0, 1, 1], 2)
    np.testing.assert_array_equal(h.masses, [0.5, 0.5])
    with pytest.raises(EmptyColumn):
        pmd([], 3)


@given(hnp.arrays(np.float64, st.integers(1, 200), elements=st.floats(-1e6, 1e6)), st.integers(1, 50))
def test_pmd_sums_to_one(col, bins):
    h = pmd(col, bins)
    assert abs(h.masses.sum() - 1) < 1e-9 and np.all(h.masses >= 0)
    assert len(h.edges) == bins + 1


def test_ratio_columns_right_skewed(records):
    m = build_variant(records, VariantKind.TT12)
    assert all(skewness(m.values[:, j]) > 0 for j in range(12))


def test_skewness_oracle():
    scipy_stats = pytest.importorskip("scipy.stats")
    x = np.random.default_rng(0).lognormal(size=500)
    assert skewness(x) == pytest.approx(scipy_stats.skew(x, bias=True), rel=1e-12)


def test_container_round_trip(tmp_path, records):
    for kind in VariantKind:
        m, _ = min_max_fit_transform(build_variant(records, kind))
        save_container(m, tmp_path / f"{kind.value}.ocfs")
        assert load_container(tmp_path / f"{kind.value}.ocfs").equals(m)
    raw = build_variant(records[:10], VariantKind.SS3)
    save_container(raw, tmp_path / "raw.ocfs")
    assert load_container(tmp_path / "raw.ocfs").equals(raw)
    assert not raw.equals(replace(raw, names=raw.names[::-1]))


def test_container_errors(tmp_path, records):
    m = build_variant(records[:10], VariantKind.SS3)
    p = tmp_path / "m.ocfs"
    save_container(m, p)
    data = bytearray(p.read_bytes())
    data[-12] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(ChecksumMismatch):
        load_container(p)
    p.write_bytes(b"garbage!" + bytes(data[8:]))
    with pytest.raises(BadMagic):
        load_container(p)


def test_labels(records):
    m = build_variant(records, VariantKind.SS3)
    assert set(m.labels("phoneme").tolist()) == set(range(12))
    assert set(m.labels("speaker").tolist()) == {0, 1, 2}
    assert FeatureMatrix.class_names("speaker") == ("children", "men", "women")
    with pytest.raises(ValueError):
        m.labels("other")
