"""Suggestion service: request handling, HTTP surface, reload, and benchmarking."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from qacrank.features import FeatureLayout
from qacrank.index import build_index
from qacrank.ranker import RankerModel, init_model, score_candidates
from qacrank.service import (
    EmptyPrefixError,
    ServiceNotReadyError,
    SuggestRequest,
    SuggestService,
    bench_latency,
    create_app,
)

from conftest import make_context


def popularity_model(records) -> RankerModel:
    """Linear model whose only signal is the log-popularity slot."""
    layout = FeatureLayout.from_records(records)
    model = init_model(layout.n_features, seed=0, hidden_sizes=())
    model.weights[0][:] = 0.0
    model.weights[0][0, 0] = 1.0
    model.biases[0][:] = 0.0
    model.layout = layout
    model.scaler = None
    return model


@pytest.fixture
def family_service(prefix_family_catalog):
    index = build_index(prefix_family_catalog)
    return SuggestService(index, popularity_model(prefix_family_catalog))


def test_prefix_family_suggests_most_popular_first(family_service):
    resp = family_service.suggest(SuggestRequest(prefix="black l"))
    texts = [s.text for s in resp.suggestions]
    assert texts[0] == "black leather jacket"
    assert texts == [
        "black leather jacket",
        "black leather boots",
        "black leather gloves",
    ]
    assert all(s.is_exact_match for s in resp.suggestions)
    assert resp.latency_micros >= 0


def test_no_match_is_empty_success(family_service):
    resp = family_service.suggest(SuggestRequest(prefix="zzzzz"))
    assert resp.suggestions == ()


def test_limit_truncates(family_service):
    resp = family_service.suggest(SuggestRequest(prefix="black", limit=1))
    assert len(resp.suggestions) == 1


def test_empty_prefix_is_a_client_error():
    with pytest.raises(EmptyPrefixError):
        SuggestRequest(prefix="   ")


def test_uninitialized_service_is_not_ready():
    service = SuggestService()
    assert not service.ready
    with pytest.raises(ServiceNotReadyError):
        service.suggest(SuggestRequest(prefix="ab"))


def test_identical_requests_get_identical_orderings(family_service):
    a = family_service.suggest(SuggestRequest(prefix="black", device_type="ios_app"))
    b = family_service.suggest(SuggestRequest(prefix="black", device_type="ios_app"))
    assert [s.text for s in a.suggestions] == [s.text for s in b.suggestions]
    assert [s.score for s in a.suggestions] == [s.score for s in b.suggestions]


def test_response_order_matches_scoring_function(small_catalog):
    index = build_index(small_catalog)
    model = popularity_model(small_catalog)
    service = SuggestService(index, model)
    prefix = "bl"
    resp = service.suggest(SuggestRequest(prefix=prefix, month=6, limit=10))
    candidates = index.retrieve(prefix, 50)
    expected = score_candidates(model, candidates, make_context(prefix, month=6))
    assert [s.text for s in resp.suggestions] == [c.query.text for c, _ in expected[:10]]


def test_previous_query_context_is_resolved(prefix_family_catalog):
    index = build_index(prefix_family_catalog)
    layout = FeatureLayout.from_records(prefix_family_catalog)
    model = init_model(layout.n_features, seed=0, hidden_sizes=())
    # score purely by department-match so context visibly reorders
    model.weights[0][:] = 0.0
    model.weights[0][7, 0] = 1.0
    model.layout = layout
    model.scaler = None
    service = SuggestService(index, model)
    resp = service.suggest(
        SuggestRequest(prefix="black leather", previous_query="black leather gloves")
    )
    assert resp.suggestions[0].text == "black leather gloves"


def test_hot_reload_swaps_versions(prefix_family_catalog, small_catalog):
    index = build_index(prefix_family_catalog)
    service = SuggestService(index, popularity_model(prefix_family_catalog))
    v1 = service.model_version
    new_model = popularity_model(prefix_family_catalog)
    new_model.biases[0][:] = 3.0  # different parameters, different fingerprint
    service.reload(index, new_model)
    assert service.model_version != v1
    assert service.suggest(SuggestRequest(prefix="black")).model_version != v1


# ---------------------------------------------------------------------------
# HTTP surface
# ---------------------------------------------------------------------------


@pytest.fixture
def client(family_service):
    return TestClient(create_app(family_service))


def test_http_suggest_happy_path(client):
    r = client.get("/suggest", params={"prefix": "black l"})
    assert r.status_code == 200
    body = r.json()
    assert body["suggestions"][0]["text"] == "black leather jacket"
    assert {"text", "score", "is_exact_match"} <= set(body["suggestions"][0])
    assert "latency_micros" in body and "model_version" in body


def test_http_blank_prefix_is_400(client):
    assert client.get("/suggest", params={"prefix": "  "}).status_code == 400


def test_http_unknown_device_is_400(client):
    r = client.get("/suggest", params={"prefix": "black", "device": "toaster"})
    assert r.status_code == 400


def test_http_prev_and_limit_params(client):
    r = client.get(
        "/suggest",
        params={"prefix": "black", "prev": "black leather boots", "limit": 2},
    )
    assert r.status_code == 200
    assert len(r.json()["suggestions"]) == 2


def test_http_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["model_version"]


def test_http_unready_service_returns_503():
    app = create_app(SuggestService())
    c = TestClient(app)
    assert c.get("/healthz").status_code == 503
    assert c.get("/suggest", params={"prefix": "ab"}).status_code == 503


# ---------------------------------------------------------------------------
# benchmarking
# ---------------------------------------------------------------------------


def test_bench_single_request_percentiles_coincide(family_service):
    summary = bench_latency(family_service, 1, concurrency=1, seed=0, warmup=5)
    assert summary.p50_micros == summary.p99_micros
    assert summary.n_requests == 1


def test_bench_concurrent_smoke(small_catalog):
    service = SuggestService(build_index(small_catalog), popularity_model(small_catalog))
    summary = bench_latency(service, 50, concurrency=4, seed=1, warmup=10)
    assert summary.throughput_rps > 0
    assert summary.p50_micros <= summary.p95_micros <= summary.p99_micros
