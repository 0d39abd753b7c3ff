"""Feature extraction layout, one-hot integrity, and scaler numerics."""

import numpy as np
import pytest

from qacrank.errors import DatasetError, LayoutMismatchError
from qacrank.features import (
    DEVICE_TYPES,
    N_BOOLS,
    N_SCALARS,
    ContextSignals,
    FeatureExtractor,
    FeatureLayout,
    ScalarStandardizer,
    ScalerStats,
    apply_scaler,
    fit_scaler,
    token_count,
)

from conftest import make_candidate, make_context, make_record

LAYOUT = FeatureLayout(n_departments=3, n_verticals=2)


def _extract(record, prefix, **ctx):
    extractor = FeatureExtractor(LAYOUT)
    return extractor.extract(make_candidate(record, prefix), make_context(prefix, **ctx))


def test_length_and_token_scalars():
    rec = make_record("black leather jacket", 0.9)
    v = _extract(rec, "black l")
    assert v[2] == 20.0  # query characters
    assert v[3] == 3.0  # query tokens
    assert v[4] == 7.0  # prefix characters
    assert v[5] == 2.0  # prefix tokens


def test_popularity_slot_is_log_of_catalog_weight():
    rec = make_record("tea", 0.25)
    v = _extract(rec, "te")
    assert v[0] == pytest.approx(np.log(0.25))


def test_seasonal_slot_is_log_of_context_month_multiplier():
    boost = tuple(float(m) for m in range(1, 13))
    rec = make_record("tea", 1.0, seasonal_boost=boost)
    v = _extract(rec, "te", month=4)
    assert v[1] == pytest.approx(np.log(4.0))


def test_exact_match_flag_follows_candidate():
    rec = make_record("black tea", 1.0)
    assert _extract(rec, "black")[6] == 1.0
    assert _extract(rec, "blakc")[6] == 0.0


def test_absent_previous_query_zeroes_match_booleans():
    rec = make_record("tea", 1.0, department=2, vertical=1)
    v = _extract(rec, "te")
    assert v[7] == 0.0 and v[8] == 0.0


def test_category_match_booleans_fire_on_equality():
    rec = make_record("tea", 1.0, department=2, vertical=1)
    v = _extract(rec, "te", prev_dept=2, prev_vert=0)
    assert v[7] == 1.0 and v[8] == 0.0
    v = _extract(rec, "te", prev_dept=1, prev_vert=1)
    assert v[7] == 0.0 and v[8] == 1.0


def test_one_hot_blocks_sum_to_one():
    rec = make_record("tea", 1.0, department=1, vertical=1)
    for device in DEVICE_TYPES:
        v = _extract(rec, "te", device=device)
        base = N_SCALARS + N_BOOLS
        dept = v[base : base + 3]
        vert = v[base + 3 : base + 5]
        dev = v[base + 5 :]
        assert dept.sum() == 1.0 and dept[1] == 1.0
        assert vert.sum() == 1.0 and vert[1] == 1.0
        assert dev.sum() == 1.0
        assert set(np.unique(np.concatenate([dept, vert, dev]))) <= {0.0, 1.0}


def test_vector_length_matches_layout():
    rec = make_record("tea", 1.0)
    assert _extract(rec, "te").shape == (LAYOUT.n_features,)
    assert LAYOUT.n_features == N_SCALARS + N_BOOLS + 3 + 2 + 4


def test_matrix_extraction_matches_single_extraction():
    extractor = FeatureExtractor(LAYOUT)
    records = [
        make_record("black tea", 0.5, department=1),
        make_record("green tea", 0.2, department=2, vertical=1),
    ]
    ctx = make_context("tea", prev_dept=1)
    candidates = [make_candidate(r, "tea") for r in records]
    X = extractor.extract_matrix(candidates, ctx)
    for i, cand in enumerate(candidates):
        np.testing.assert_array_equal(X[i], extractor.extract(cand, ctx))


def test_token_count_handles_runs_of_spaces():
    assert token_count("black  leather   jacket") == 3
    assert token_count("tea") == 1


def test_scaler_of_single_vector_centers_and_unit_stds():
    v = np.zeros(LAYOUT.n_features)
    v[:N_SCALARS] = [3.0, 1.0, 20.0, 3.0, 7.0, 2.0]
    stats = fit_scaler([v])
    assert stats.means == (3.0, 1.0, 20.0, 3.0, 7.0, 2.0)
    assert stats.stds == tuple(1.0 for _ in range(N_SCALARS))
    np.testing.assert_allclose(apply_scaler(stats, v)[:N_SCALARS], 0.0)


def test_scaler_two_point_population_std():
    a = np.zeros(LAYOUT.n_features)
    b = np.zeros(LAYOUT.n_features)
    a[:N_SCALARS] = 1.0
    b[:N_SCALARS] = 3.0
    stats = fit_scaler([a, b])
    assert stats.means == tuple(2.0 for _ in range(N_SCALARS))
    assert stats.stds == tuple(1.0 for _ in range(N_SCALARS))


def test_scaling_own_data_centers_scalars():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(500, LAYOUT.n_features))
    stats = fit_scaler(X)
    scaled = apply_scaler(stats, X)
    assert np.all(np.abs(scaled[:, :N_SCALARS].mean(axis=0)) < 1e-9)


def test_identity_stats_leave_vectors_unchanged():
    stats = ScalerStats(means=(0.0,) * N_SCALARS, stds=(1.0,) * N_SCALARS)
    v = np.arange(LAYOUT.n_features, dtype=float)
    np.testing.assert_array_equal(apply_scaler(stats, v), v)


def test_scaler_never_touches_one_hot_or_boolean_slots():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, LAYOUT.n_features))
    X[:, N_SCALARS:] = rng.integers(0, 2, size=(50, LAYOUT.n_features - N_SCALARS))
    stats = fit_scaler(X)
    scaled = apply_scaler(stats, X)
    np.testing.assert_array_equal(scaled[:, N_SCALARS:], X[:, N_SCALARS:])


def test_scaler_round_trip_recovers_originals():
    rng = np.random.default_rng(12)
    X = rng.normal(loc=5.0, scale=3.0, size=(200, LAYOUT.n_features))
    scaler = ScalarStandardizer().fit(X)
    back = scaler.inverse_transform(scaler.transform(X))
    np.testing.assert_allclose(back, X, rtol=1e-12)


def test_layout_version_mismatch_is_rejected():
    stats = ScalerStats(
        means=(0.0,) * N_SCALARS, stds=(1.0,) * N_SCALARS, layout_version=99
    )
    with pytest.raises(LayoutMismatchError):
        apply_scaler(stats, np.zeros(LAYOUT.n_features))


def test_layout_incompatibility_check():
    other = FeatureLayout(n_departments=4, n_verticals=2)
    with pytest.raises(LayoutMismatchError):
        LAYOUT.check_compatible(other)


def test_fit_scaler_rejects_empty_dataset():
    with pytest.raises(DatasetError):
        ScalarStandardizer().fit(np.zeros((0, LAYOUT.n_features)))


def test_context_validation():
    with pytest.raises(DatasetError):
        ContextSignals(prefix_text="a", device_type="smart_fridge", month=6)
    with pytest.raises(DatasetError):
        ContextSignals(prefix_text="a", device_type="ios_app", month=0)


def test_estimator_params_round_trip():
    scaler = ScalarStandardizer()
    assert scaler.get_params() == {"layout_version": 1}
    clone_params = ScalarStandardizer(**scaler.get_params()).get_params()
    assert clone_params == scaler.get_params()
