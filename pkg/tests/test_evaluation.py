"""Reciprocal-rank evaluation against a hand-rolled per-event oracle."""

import numpy as np
import pytest

from qacrank.errors import DatasetError
from qacrank.evaluation import evaluate
from qacrank.features import FeatureLayout
from qacrank.index import build_index
from qacrank.ranker import NeuralRanker, PopularityRanker
from qacrank.simulate import QACEngagementEntry, SearchLogEntry
from qacrank.training_data import PrefixLengthDistribution, build_real_instances

from conftest import make_record
from oracles import brute_force_mrr


def _entry(clicked, shown, prefix="qq", device="ios_app", month=6, prev=None):
    return QACEngagementEntry(
        prefix=prefix,
        shown=tuple(shown),
        clicked=clicked,
        clicked_rank=shown.index(clicked) + 1,
        session_id="s",
        previous_query_text=prev,
        device_type=device,
        month=month,
    )


@pytest.fixture(scope="module")
def ladder():
    """Five queries with strictly decreasing popularity, shared prefix."""
    records = [make_record(f"qq item {chr(97 + i)}", popularity=1.0 - 0.15 * i)
               for i in range(5)]
    return records, build_index(records)


def test_target_always_first_gives_perfect_mrr(ladder):
    records, index = ladder
    shown = [r.text for r in records]
    events = [_entry(records[0].text, shown) for _ in range(10)]
    report = evaluate(PopularityRanker(), index, events, "qac")
    assert report.mrr == 1.0
    assert report.mean_click_position == 1.0
    assert report.n_target_missing == 0


def test_two_event_rank_one_and_four_average(ladder):
    records, index = ladder
    shown = [r.text for r in records]
    events = [
        _entry(records[0].text, shown),  # re-ranked to position 1 by popularity
        _entry(records[3].text, shown),  # re-ranked to position 4
    ]
    report = evaluate(PopularityRanker(), index, events, "qac")
    assert report.mrr == pytest.approx((1.0 + 0.25) / 2)
    assert report.mrr == pytest.approx(0.625)


def test_unretrievable_target_counts_as_missing():
    # two queries share the sampled prefix; with m=1 only the popular one returns
    records = [make_record("aaa top", 1.0), make_record("aaa low", 0.2)]
    index = build_index(records)
    d = PrefixLengthDistribution({7: {3: 1.0}}, smoothing=0.0)
    events = [
        SearchLogEntry(query_text="aaa low", session_id="s", previous_query_text=None,
                       device_type="ios_app", month=1)
        for _ in range(6)
    ]
    report = evaluate(PopularityRanker(), index, events, "general", m=1, dist=d, seed=0)
    assert report.mrr == 0.0
    assert report.n_target_missing == len(events)
    assert np.isnan(report.mean_click_position)


def test_fifty_event_fixture_matches_brute_force_oracle(ladder):
    records, index = ladder
    rng = np.random.default_rng(31)
    instances = []
    events = []
    for _ in range(50):
        order = rng.permutation(len(records))
        shown = [records[i].text for i in order]
        clicked = shown[int(rng.integers(len(shown)))]
        events.append(_entry(clicked, shown, month=int(rng.integers(1, 13))))
    instances = build_real_instances(events, index)
    layout = FeatureLayout.from_records(records)
    est = NeuralRanker(hidden_layers=(8,), epochs=2, batch_size=16, seed=1)
    est.fit(instances, layout)

    report = evaluate(est, index, events, "qac")

    oracle_ranks = []
    for e in events:
        candidates = []
        from qacrank.index import Candidate

        for text in e.shown:
            rec = index.lookup(text)
            candidates.append(Candidate(rec, text.startswith(e.prefix), rec.popularity))
        from qacrank.features import ContextSignals

        ctx = ContextSignals(prefix_text=e.prefix, device_type=e.device_type, month=e.month)
        ranked = est.score_candidates(candidates, ctx)
        rank = next(
            i + 1 for i, (c, _) in enumerate(ranked) if c.query.text == e.clicked
        )
        oracle_ranks.append(rank)
    assert report.mrr == brute_force_mrr(oracle_ranks)


def test_slice_mrrs_aggregate_to_global(ladder):
    records, index = ladder
    rng = np.random.default_rng(7)
    devices = ["ios_app", "android_app", "desktop_browser", "mobile_browser"]
    events = []
    for i in range(80):
        order = rng.permutation(len(records))
        shown = [records[j].text for j in order]
        events.append(
            _entry(
                shown[int(rng.integers(len(shown)))],
                shown,
                device=devices[i % 4],
                prev=records[0].text if i % 3 == 0 else None,
            )
        )
    report = evaluate(PopularityRanker(), index, events, "qac")
    for slices in (report.by_device, report.by_has_previous):
        total_n = sum(s.n_events for s in slices.values())
        weighted = sum(s.mrr * s.n_events for s in slices.values())
        assert total_n == report.n_events
        assert abs(weighted / total_n - report.mrr) < 1e-12


def test_evaluation_leaves_model_untouched(ladder):
    records, index = ladder
    events = [_entry(records[0].text, [r.text for r in records])]
    instances = build_real_instances(events * 3, index)
    est = NeuralRanker(hidden_layers=(6,), epochs=1, batch_size=4, seed=0)
    est.fit(instances, FeatureLayout.from_records(records))
    before = [w.copy() for w in est.model_.weights]
    evaluate(est, index, events, "qac")
    for w, orig in zip(est.model_.weights, before):
        np.testing.assert_array_equal(w, orig)


def test_general_mode_prefix_sampling_is_reproducible(ladder):
    records, index = ladder
    d = PrefixLengthDistribution({9: {2: 1.0, 4: 1.0}}, smoothing=0.0)
    events = [
        SearchLogEntry(query_text=r.text, session_id="s", previous_query_text=None,
                       device_type="android_app", month=2)
        for r in records * 20
    ]
    a = evaluate(PopularityRanker(), index, events, "general", m=3, dist=d, seed=5)
    b = evaluate(PopularityRanker(), index, events, "general", m=3, dist=d, seed=5)
    assert a.mrr == b.mrr
    assert a.to_dict() == b.to_dict()


def test_mode_and_input_validation(ladder):
    records, index = ladder
    with pytest.raises(DatasetError):
        evaluate(PopularityRanker(), index, [], "qac")
    events = [_entry(records[0].text, [r.text for r in records])]
    with pytest.raises(DatasetError):
        evaluate(PopularityRanker(), index, events, "sideways")
    logs = [SearchLogEntry(query_text=records[0].text, session_id="s",
                           previous_query_text=None, device_type="ios_app", month=1)]
    with pytest.raises(DatasetError):
        evaluate(PopularityRanker(), index, logs, "general", dist=None)
