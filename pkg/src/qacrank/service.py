"""Low-latency suggestion service: retrieve, featurize, score, and sort per request.

All request handling runs against an immutable snapshot (index + model +
resolved metadata); hot reload builds a whole new snapshot and swaps one
attribute reference, so concurrent readers never see a half-updated state
and the request path takes no locks.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import QacError
from .features import DEVICE_TYPES, ContextSignals
from .index import PrefixIndex, load_index
from .ranker import RankerModel, load_model, score_candidates

MAX_LIMIT = 50


class EmptyPrefixError(QacError):
    """Client sent a blank prefix."""


class ServiceNotReadyError(QacError):
    """No index/model snapshot has been loaded yet."""


@dataclass(frozen=True)
class SuggestRequest:
    prefix: str
    device_type: str = "desktop_browser"
    previous_query: str | None = None
    month: int | None = None
    limit: int = 10

    def __post_init__(self) -> None:
        if not self.prefix.strip():
            raise EmptyPrefixError("prefix must be non-empty")
        if self.device_type not in DEVICE_TYPES:
            raise QacError(f"unknown device_type {self.device_type!r}")
        if not 1 <= self.limit <= MAX_LIMIT:
            raise QacError(f"limit must be in 1..{MAX_LIMIT}, got {self.limit}")
        if self.month is not None and not 1 <= self.month <= 12:
            raise QacError(f"month must be in 1..12, got {self.month}")


@dataclass(frozen=True)
class Suggestion:
    text: str
    score: float
    is_exact_match: bool


@dataclass(frozen=True)
class SuggestResponse:
    suggestions: tuple[Suggestion, ...]
    latency_micros: int
    model_version: str

    def to_dict(self) -> dict:
        return {
            "suggestions": [
                {"text": s.text, "score": s.score, "is_exact_match": s.is_exact_match}
                for s in self.suggestions
            ],
            "latency_micros": self.latency_micros,
            "model_version": self.model_version,
        }


class _Snapshot:
    __slots__ = ("index", "model", "version")

    def __init__(self, index: PrefixIndex, model: RankerModel):
        self.index = index
        self.model = model
        self.version = model.fingerprint()


class SuggestService:
    """Serves ranked suggestions from one atomically swappable snapshot."""

    def __init__(
        self,
        index: PrefixIndex | None = None,
        model: RankerModel | None = None,
        retrieval_m: int = 50,
    ):
        self.retrieval_m = retrieval_m
        self._snapshot: _Snapshot | None = None
        if index is not None and model is not None:
            self.reload(index, model)

    @classmethod
    def from_files(
        cls, index_path: str | os.PathLike, model_path: str | os.PathLike, retrieval_m: int = 50
    ) -> "SuggestService":
        return cls(load_index(index_path), load_model(model_path), retrieval_m=retrieval_m)

    @property
    def ready(self) -> bool:
        return self._snapshot is not None

    @property
    def model_version(self) -> str | None:
        snap = self._snapshot
        return None if snap is None else snap.version

    def reload(self, index: PrefixIndex, model: RankerModel) -> None:
        """Swap in a fresh immutable snapshot; in-flight requests keep the old one."""
        self._snapshot = _Snapshot(index, model)

    def suggest(self, request: SuggestRequest) -> SuggestResponse:
        snap = self._snapshot
        if snap is None:
            raise ServiceNotReadyError("service has no loaded index/model")
        t0 = time.perf_counter_ns()

        month = request.month if request.month is not None else time.localtime().tm_mon
        candidates = snap.index.retrieve(request.prefix, self.retrieval_m)
        suggestions: tuple[Suggestion, ...] = ()
        if candidates:
            prev = (
                snap.index.lookup(request.previous_query) if request.previous_query else None
            )
            context = ContextSignals(
                prefix_text=request.prefix,
                device_type=request.device_type,
                month=month,
                previous_query_department=None if prev is None else prev.department,
                previous_query_vertical=None if prev is None else prev.vertical,
            )
            ranked = score_candidates(snap.model, candidates, context)
            suggestions = tuple(
                Suggestion(text=c.query.text, score=s, is_exact_match=c.is_exact_match)
                for c, s in ranked[: request.limit]
            )

        latency = (time.perf_counter_ns() - t0) // 1000
        return SuggestResponse(
            suggestions=suggestions, latency_micros=int(latency), model_version=snap.version
        )


@dataclass(frozen=True)
class LatencySummary:
    p50_micros: float
    p95_micros: float
    p99_micros: float
    throughput_rps: float
    n_requests: int
    concurrency: int

    def to_dict(self) -> dict:
        return {
            "p50_micros": self.p50_micros,
            "p95_micros": self.p95_micros,
            "p99_micros": self.p99_micros,
            "throughput_rps": self.throughput_rps,
            "n_requests": self.n_requests,
            "concurrency": self.concurrency,
        }


def _workload(service: SuggestService, n: int, seed: int) -> list[SuggestRequest]:
    """Deterministic request stream: random catalog queries cut at random lengths."""
    snap = service._snapshot
    if snap is None:
        raise ServiceNotReadyError("cannot benchmark an unloaded service")
    records = snap.index.records
    rng = np.random.default_rng(seed)
    requests = []
    for _ in range(n):
        rec = records[int(rng.integers(len(records)))]
        k = int(rng.integers(1, len(rec.text) + 1))
        device = DEVICE_TYPES[int(rng.integers(len(DEVICE_TYPES)))]
        requests.append(
            SuggestRequest(prefix=rec.text[:k], device_type=device, month=6, limit=10)
        )
    return requests


def bench_latency(
    service: SuggestService,
    n_requests: int,
    concurrency: int = 1,
    seed: int = 0,
    warmup: int | None = None,
) -> LatencySummary:
    """Drive the full suggest path and summarize per-request latency and throughput."""
    if n_requests < 1 or concurrency < 1:
        raise QacError("n_requests and concurrency must be >= 1")
    requests = _workload(service, n_requests, seed)
    n_warm = min(200, n_requests) if warmup is None else warmup
    for req in _workload(service, n_warm, seed + 1):
        service.suggest(req)

    t0 = time.perf_counter()
    if concurrency == 1:
        latencies = [service.suggest(r).latency_micros for r in requests]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            latencies = [
                resp.latency_micros for resp in pool.map(service.suggest, requests)
            ]
    wall = time.perf_counter() - t0

    arr = np.asarray(latencies, dtype=np.float64)
    return LatencySummary(
        p50_micros=float(np.percentile(arr, 50)),
        p95_micros=float(np.percentile(arr, 95)),
        p99_micros=float(np.percentile(arr, 99)),
        throughput_rps=n_requests / wall if wall > 0 else float("inf"),
        n_requests=n_requests,
        concurrency=concurrency,
    )


def create_app(service: SuggestService):
    """FastAPI wrapper exposing GET /suggest and GET /healthz."""
    from fastapi import FastAPI, HTTPException, Query

    app = FastAPI(title="qacrank suggest service")

    @app.get("/suggest")
    def suggest(
        prefix: str = Query(...),
        device: str = Query("desktop_browser"),
        prev: str | None = Query(None),
        limit: int = Query(10, ge=1, le=MAX_LIMIT),
        month: int | None = Query(None, ge=1, le=12),
    ) -> dict:
        try:
            request = SuggestRequest(
                prefix=prefix, device_type=device, previous_query=prev, month=month, limit=limit
            )
            return service.suggest(request).to_dict()
        except EmptyPrefixError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ServiceNotReadyError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except QacError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/healthz")
    def healthz() -> dict:
        if not service.ready:
            raise HTTPException(status_code=503, detail="no model loaded")
        return {"status": "ok", "model_version": service.model_version}

    return app
