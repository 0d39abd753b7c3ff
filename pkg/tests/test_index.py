"""Prefix index: hand-checked retrievals plus oracle equivalence against a full scan."""

import numpy as np
import pytest

from qacrank.catalog import QueryRecord
from qacrank.errors import DatasetError, DuplicateQueryError
from qacrank.index import build_index, load_index, save_index

from conftest import make_record, random_catalog, random_prefix
from oracles import brute_force_retrieve, min_dist_to_any_prefix


def test_empty_catalog_yields_empty_retrievals():
    index = build_index([])
    assert index.retrieve("anything", 10) == []


def test_prefix_family_retrieval_orders_by_popularity(prefix_family_index):
    result = prefix_family_index.retrieve("black l", 3)
    assert [c.query.text for c in result] == [
        "black leather jacket",
        "black leather boots",
        "black leather gloves",
    ]
    assert all(c.is_exact_match for c in result)


def test_no_match_returns_empty(prefix_family_index):
    assert prefix_family_index.retrieve("zzz", 10) == []


def test_transposed_prefix_matches_fuzzily(prefix_family_index):
    result = prefix_family_index.retrieve("blakc", 10)
    assert [c.query.text for c in result] == [
        "black leather jacket",
        "black leather boots",
        "black leather gloves",
    ]
    assert not any(c.is_exact_match for c in result)
    # independent confirmation that the transposition is one substitution pair away
    assert min_dist_to_any_prefix("blakc", "black leather jacket") > 0


def test_truncation_returns_single_top_exact_match(prefix_family_index):
    result = prefix_family_index.retrieve("black", 1)
    assert len(result) == 1
    assert result[0].query.text == "black leather jacket"
    assert result[0].is_exact_match


def test_duplicate_query_text_is_rejected():
    records = [make_record("milk", 1.0), make_record("milk", 0.5)]
    with pytest.raises(DuplicateQueryError, match="milk"):
        build_index(records)


def test_retrieval_score_is_popularity(prefix_family_index):
    for cand in prefix_family_index.retrieve("black", 3):
        assert cand.retrieval_score == cand.query.popularity


def test_exact_matches_never_follow_fuzzy_ones(small_index):
    rng = np.random.default_rng(4)
    for _ in range(200):
        prefix = random_prefix(rng, small_index.records, alphabet="abcdefghij")
        result = small_index.retrieve(prefix, 20)
        flags = [c.is_exact_match for c in result]
        assert flags == sorted(flags, reverse=True)


def test_retrieve_is_monotone_under_truncation(small_index):
    rng = np.random.default_rng(5)
    for _ in range(50):
        prefix = random_prefix(rng, small_index.records, alphabet="abcdefghij")
        short = small_index.retrieve(prefix, 5)
        long = small_index.retrieve(prefix, 9)
        assert [c.query.text for c in short] == [c.query.text for c in long][: len(short)]


def test_single_char_prefix_fuzzy_covers_catalog(small_index):
    # deleting the single typed character leaves the empty string, which is a
    # prefix of everything, so every query is at least a fuzzy match
    result = small_index.retrieve("q", len(small_index))
    assert len(result) == len(small_index)


def test_retrieve_rejects_empty_prefix_and_bad_m(small_index):
    with pytest.raises(ValueError):
        small_index.retrieve("", 5)
    with pytest.raises(ValueError):
        small_index.retrieve("a", 0)


def test_oracle_equivalence_on_random_catalogs():
    rng = np.random.default_rng(42)
    for _ in range(25):
        records = random_catalog(rng, int(rng.integers(5, 400)))
        index = build_index(records)
        for _ in range(20):
            prefix = random_prefix(rng, records)
            m = int(rng.integers(1, 30))
            got = [(c.query.text, c.is_exact_match) for c in index.retrieve(prefix, m)]
            want = brute_force_retrieve(records, prefix, m)
            assert got == want, f"prefix={prefix!r} m={m}"


def test_vectorized_oracle_agrees_with_scalar_reference():
    rng = np.random.default_rng(9)
    records = random_catalog(rng, 60)
    for _ in range(40):
        prefix = random_prefix(rng, records)
        for rec in records:
            scalar = min_dist_to_any_prefix(prefix, rec.text) <= 1
            listed = any(t == rec.text for t, _ in brute_force_retrieve(records, prefix, 10_000))
            exact = rec.text.startswith(prefix)
            assert listed == (scalar or exact)


def test_same_query_set_same_retrieval_regardless_of_insert_order():
    rng = np.random.default_rng(17)
    records = random_catalog(rng, 100)
    index_a = build_index(records)
    index_b = build_index(list(reversed(records)))
    for _ in range(30):
        prefix = random_prefix(rng, records)
        a = [(c.query.text, c.is_exact_match) for c in index_a.retrieve(prefix, 10)]
        b = [(c.query.text, c.is_exact_match) for c in index_b.retrieve(prefix, 10)]
        assert a == b


def test_index_file_round_trip(tmp_path, small_catalog):
    index = build_index(small_catalog)
    path = tmp_path / "index.bin"
    save_index(path, index)
    loaded = load_index(path)
    assert loaded.records == index.records
    for prefix in ("bla", "greq", "s"):
        got = [(c.query.text, c.is_exact_match) for c in loaded.retrieve(prefix, 10)]
        want = [(c.query.text, c.is_exact_match) for c in index.retrieve(prefix, 10)]
        assert got == want


def test_index_file_bad_magic_is_rejected(tmp_path):
    path = tmp_path / "bogus.bin"
    path.write_bytes(b"NOTANIDX" + b"junk")
    with pytest.raises(DatasetError, match="magic"):
        load_index(path)


def test_concurrent_retrieval_is_consistent(small_index):
    from concurrent.futures import ThreadPoolExecutor

    prefixes = ["b", "bl", "bla", "gre", "slim", "xq"] * 25
    expected = {p: [c.query.text for c in small_index.retrieve(p, 10)] for p in set(prefixes)}

    def work(p):
        return p, [c.query.text for c in small_index.retrieve(p, 10)]

    with ThreadPoolExecutor(max_workers=8) as pool:
        for p, got in pool.map(work, prefixes):
            assert got == expected[p]
