"""Mean-reciprocal-rank evaluation over engagement replays and search-log completions.

Two complementary views of ranking quality: replaying held-out engagement
entries re-ranks exactly what a user saw (high fidelity, but inherits the
presentation bias of whatever ranking produced the logs), while the
search-log mode samples a prefix for each logged full query, retrieves, and
re-ranks (less biased, since those queries were typed without suggestions).
Targets that retrieval misses contribute zero reciprocal rank and are
reported, not silently dropped.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError
from .features import ContextSignals
from .index import Candidate, PrefixIndex
from .ranker import SuggestionRanker
from .simulate import QACEngagementEntry, SearchLogEntry
from .training_data import PrefixLengthDistribution, sample_prefix


@dataclass
class SliceStat:
    n_events: int = 0
    rr_sum: float = 0.0

    @property
    def mrr(self) -> float:
        return self.rr_sum / self.n_events if self.n_events else 0.0


@dataclass
class EvalReport:
    """MRR plus per-slice breakdowns for one ranker on one event set."""

    mode: str
    mrr: float
    n_events: int
    n_target_missing: int
    mean_click_position: float
    by_device: dict[str, SliceStat] = field(default_factory=dict)
    by_has_previous: dict[bool, SliceStat] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mrr": self.mrr,
            "n_events": self.n_events,
            "n_target_missing": self.n_target_missing,
            "mean_click_position": self.mean_click_position,
            "by_device": {
                k: {"mrr": v.mrr, "n_events": v.n_events} for k, v in self.by_device.items()
            },
            "by_has_previous": {
                str(k).lower(): {"mrr": v.mrr, "n_events": v.n_events}
                for k, v in self.by_has_previous.items()
            },
        }


def _context_for(
    index: PrefixIndex, prefix: str, device_type: str, month: int, previous: str | None
) -> ContextSignals:
    prev = index.lookup(previous) if previous else None
    return ContextSignals(
        prefix_text=prefix,
        device_type=device_type,
        month=month,
        previous_query_department=None if prev is None else prev.department,
        previous_query_vertical=None if prev is None else prev.vertical,
    )


def _target_rank(
    ranker: SuggestionRanker,
    candidates: list[Candidate],
    context: ContextSignals,
    target: str,
) -> int:
    """1-based rank of ``target`` after re-ranking, 0 if absent."""
    for rank, (cand, _score) in enumerate(ranker.score_candidates(candidates, context), start=1):
        if cand.query.text == target:
            return rank
    return 0


def evaluate(
    ranker: SuggestionRanker,
    index: PrefixIndex,
    events: list[QACEngagementEntry] | list[SearchLogEntry],
    mode: str,
    m: int = 50,
    dist: PrefixLengthDistribution | None = None,
    seed: int = 0,
) -> EvalReport:
    """Score a ranker over events.

    ``mode="qac"``: events are engagement entries; the shown list is
    re-ranked and the clicked query's reciprocal rank recorded.
    ``mode="general"``: events are search-log entries; a prefix is sampled
    from ``dist`` (seeded, reproducible), the top ``m`` candidates retrieved
    and re-ranked, and the logged query's reciprocal rank recorded — zero
    when retrieval misses it.
    """
    if not events:
        raise DatasetError("no events to evaluate")
    if mode not in ("qac", "general"):
        raise DatasetError(f"unknown evaluation mode {mode!r}")
    if mode == "general" and dist is None:
        raise DatasetError("general mode needs a fitted prefix-length distribution")

    rng = np.random.default_rng(seed)
    rr_sum = 0.0
    missing = 0
    position_sum = 0.0
    positions = 0
    by_device: dict[str, SliceStat] = {}
    by_prev: dict[bool, SliceStat] = {}

    for event in events:
        if mode == "qac":
            entry = event  # type: ignore[assignment]
            candidates = []
            for text in entry.shown:
                rec = index.lookup(text)
                if rec is None:
                    raise DatasetError(f"shown suggestion {text!r} is not in the catalog")
                candidates.append(
                    Candidate(
                        query=rec,
                        is_exact_match=text.startswith(entry.prefix),
                        retrieval_score=rec.popularity,
                    )
                )
            context = _context_for(
                index, entry.prefix, entry.device_type, entry.month, entry.previous_query_text
            )
            rank = _target_rank(ranker, candidates, context, entry.clicked)
            device = entry.device_type
            has_prev = entry.previous_query_text is not None
        else:
            log = event  # type: ignore[assignment]
            prefix = sample_prefix(log.query_text, dist, rng)
            candidates = index.retrieve(prefix, m)
            context = _context_for(
                index, prefix, log.device_type, log.month, log.previous_query_text
            )
            rank = (
                _target_rank(ranker, candidates, context, log.query_text) if candidates else 0
            )
            device = log.device_type
            has_prev = log.previous_query_text is not None

        rr = 1.0 / rank if rank else 0.0
        if rank:
            position_sum += rank
            positions += 1
        else:
            missing += 1
        rr_sum += rr
        dstat = by_device.setdefault(device, SliceStat())
        dstat.n_events += 1
        dstat.rr_sum += rr
        pstat = by_prev.setdefault(has_prev, SliceStat())
        pstat.n_events += 1
        pstat.rr_sum += rr

    n = len(events)
    return EvalReport(
        mode=mode,
        mrr=rr_sum / n,
        n_events=n,
        n_target_missing=missing,
        mean_click_position=position_sum / positions if positions else float("nan"),
        by_device=by_device,
        by_has_previous=by_prev,
    )


def save_report(path: str | os.PathLike, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
