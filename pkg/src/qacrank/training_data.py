"""Training datasets: the prefix-length distribution, synthetic instances, and mixing.

Engagement logs tell us at which prefix length users of a given query length
tend to click; fitting that as a per-length distribution lets us replay full
queries from ordinary search logs as if they had been typed into the
autocomplete box.  Each replayed query becomes one training instance whose
positive is the logged query and whose negatives are everything else the
retrieval system would have shown for the sampled prefix — labels that no
existing ranking could have biased.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError
from .features import ContextSignals
from .index import Candidate, PrefixIndex
from .jsonl import load_jsonl, write_jsonl
from .ranker import TrainingInstance
from .simulate import QACEngagementEntry, SearchLogEntry


class PrefixLengthDistribution:
    """Per-query-length pmf over click-time prefix lengths.

    For an observed query length ``s`` the pmf is the smoothed normalized
    tally over 1..s.  Unseen lengths fall back to counts pooled from lengths
    within ``window``, then to the global pool, then to uniform.
    """

    def __init__(self, counts: dict[int, dict[int, float]], smoothing: float, window: int = 2):
        if smoothing < 0:
            raise DatasetError("smoothing must be >= 0")
        self.counts = {int(s): {int(k): float(c) for k, c in by_k.items()}
                       for s, by_k in counts.items()}
        self.smoothing = float(smoothing)
        self.window = int(window)
        self._pmf_cache: dict[int, np.ndarray] = {}
        self._cdf_cache: dict[int, np.ndarray] = {}

    def observed_lengths(self) -> list[int]:
        return sorted(self.counts)

    def pmf(self, s: int) -> np.ndarray:
        """Probability of each prefix length 1..s for queries of length ``s``."""
        if s < 1:
            raise DatasetError(f"query length must be >= 1, got {s}")
        cached = self._pmf_cache.get(s)
        if cached is not None:
            return cached

        vec = np.zeros(s, dtype=np.float64)
        if s in self.counts:
            for k, c in self.counts[s].items():
                if 1 <= k <= s:
                    vec[k - 1] += c
        else:
            for s2 in range(s - self.window, s + self.window + 1):
                for k, c in self.counts.get(s2, {}).items():
                    if 1 <= k <= s:
                        vec[k - 1] += c
            if vec.sum() == 0.0:
                for by_k in self.counts.values():
                    for k, c in by_k.items():
                        if 1 <= k <= s:
                            vec[k - 1] += c
        vec += self.smoothing
        total = vec.sum()
        if total == 0.0:
            vec[:] = 1.0
            total = float(s)
        vec /= total
        self._pmf_cache[s] = vec
        return vec

    def sample(self, s: int, rng: np.random.Generator) -> int:
        cdf = self._cdf_cache.get(s)
        if cdf is None:
            cdf = np.cumsum(self.pmf(s))
            self._cdf_cache[s] = cdf
        k = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
        return min(k, s)


def estimate_distribution(
    engagement: list[QACEngagementEntry], smoothing: float = 0.5
) -> PrefixLengthDistribution:
    """Tally click-time prefix lengths per clicked-query length."""
    if not engagement:
        raise DatasetError("cannot estimate a prefix-length distribution from no engagement")
    counts: dict[int, dict[int, float]] = {}
    for e in engagement:
        s = len(e.clicked)
        by_k = counts.setdefault(s, {})
        k = len(e.prefix)
        by_k[k] = by_k.get(k, 0.0) + 1.0
    return PrefixLengthDistribution(counts, smoothing)


def sample_prefix(query: str, d: PrefixLengthDistribution, rng: np.random.Generator) -> str:
    """First k characters of ``query`` with k drawn from the fitted distribution."""
    if not query:
        raise DatasetError("query must be non-empty")
    return query[: d.sample(len(query), rng)]


@dataclass
class SynthStats:
    """Skip accounting for synthetic generation; skips are data, not errors."""

    produced: int = 0
    missing_from_catalog: int = 0
    positive_not_retrieved: int = 0
    no_negatives: int = 0


def generate_synthetic(
    search_logs: list[SearchLogEntry],
    d: PrefixLengthDistribution,
    index: PrefixIndex,
    m: int,
    rng: np.random.Generator,
    stats: SynthStats | None = None,
) -> list[TrainingInstance]:
    """Replay full search queries through retrieval with sampled prefixes.

    The logged query is the positive; the other retrieved suggestions are the
    negatives.  Entries whose query cannot be retrieved under its sampled
    prefix are skipped and counted, never force-injected.
    """
    instances: list[TrainingInstance] = []
    for entry in search_logs:
        rec = index.lookup(entry.query_text)
        if rec is None:
            if stats is not None:
                stats.missing_from_catalog += 1
            continue
        prefix = sample_prefix(entry.query_text, d, rng)
        candidates = index.retrieve(prefix, m)
        positive = None
        for c in candidates:
            if c.query.text == entry.query_text:
                positive = c
                break
        if positive is None:
            if stats is not None:
                stats.positive_not_retrieved += 1
            continue
        negatives = tuple(c for c in candidates if c is not positive)
        if not negatives:
            if stats is not None:
                stats.no_negatives += 1
            continue
        prev = index.lookup(entry.previous_query_text) if entry.previous_query_text else None
        context = ContextSignals(
            prefix_text=prefix,
            device_type=entry.device_type,
            month=entry.month,
            previous_query_department=None if prev is None else prev.department,
            previous_query_vertical=None if prev is None else prev.vertical,
        )
        instances.append(
            TrainingInstance(prefix=prefix, context=context, positive=positive,
                             negatives=negatives)
        )
        if stats is not None:
            stats.produced += 1
    return instances


@dataclass
class RealStats:
    produced: int = 0
    no_negatives: int = 0


def build_real_instances(
    engagement: list[QACEngagementEntry],
    index: PrefixIndex,
    stats: RealStats | None = None,
) -> list[TrainingInstance]:
    """Clicked suggestion becomes the positive; the rest of the shown list, negatives."""
    instances: list[TrainingInstance] = []
    for entry in engagement:
        candidates = []
        positive = None
        for text in entry.shown:
            rec = index.lookup(text)
            if rec is None:
                raise DatasetError(f"shown suggestion {text!r} is not in the catalog")
            cand = Candidate(
                query=rec,
                is_exact_match=text.startswith(entry.prefix),
                retrieval_score=rec.popularity,
            )
            if text == entry.clicked:
                positive = cand
            else:
                candidates.append(cand)
        if positive is None:
            raise DatasetError(f"clicked query {entry.clicked!r} missing from shown list")
        if not candidates:
            if stats is not None:
                stats.no_negatives += 1
            continue
        prev = index.lookup(entry.previous_query_text) if entry.previous_query_text else None
        context = ContextSignals(
            prefix_text=entry.prefix,
            device_type=entry.device_type,
            month=entry.month,
            previous_query_department=None if prev is None else prev.department,
            previous_query_vertical=None if prev is None else prev.vertical,
        )
        instances.append(
            TrainingInstance(prefix=entry.prefix, context=context, positive=positive,
                             negatives=tuple(candidates))
        )
        if stats is not None:
            stats.produced += 1
    return instances


@dataclass(frozen=True)
class MixRatio:
    """Fraction of the blended dataset that should come from real engagement."""

    real_fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.real_fraction <= 1.0:
            raise DatasetError("real_fraction must be in [0, 1]")


def _half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def mix_datasets(
    real: list[TrainingInstance],
    synthetic: list[TrainingInstance],
    ratio: MixRatio,
    rng: np.random.Generator,
) -> list[TrainingInstance]:
    """Blend the two sources so the output holds ``real_fraction`` real instances.

    The target size is the larger pool's size, shrunk until the exact
    fraction fits in both pools — a scarce source caps the whole blend
    rather than skewing the ratio.  Instances are subsampled without
    replacement and shuffled, never copied or altered.
    """
    f = ratio.real_fraction
    if f > 0.0 and not real:
        raise DatasetError(f"mix needs real instances for real_fraction={f} but got none")
    if f < 1.0 and not synthetic:
        raise DatasetError(f"mix needs synthetic instances for real_fraction={f} but got none")

    total = max(len(real), len(synthetic))
    if 0.0 < f < 1.0:
        total = min(total, int((len(real) + 0.5) / f) + 1,
                    int((len(synthetic) + 0.5) / (1.0 - f)) + 1)
    n_real = _half_up(f * total)
    while total > 0 and (n_real > len(real) or total - n_real > len(synthetic)):
        total -= 1
        n_real = _half_up(f * total)
    n_synth = total - n_real

    picked: list[TrainingInstance] = []
    if n_real:
        picked.extend(real[i] for i in rng.permutation(len(real))[:n_real])
    if n_synth:
        picked.extend(synthetic[i] for i in rng.permutation(len(synthetic))[:n_synth])
    order = rng.permutation(len(picked))
    return [picked[i] for i in order]


def save_distribution(path: str | os.PathLike, d: PrefixLengthDistribution) -> None:
    payload = {
        "smoothing": d.smoothing,
        "window": d.window,
        "counts": {str(s): {str(k): c for k, c in by_k.items()} for s, by_k in d.counts.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def load_distribution(path: str | os.PathLike) -> PrefixLengthDistribution:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return PrefixLengthDistribution(
        counts={int(s): {int(k): float(c) for k, c in by_k.items()}
                for s, by_k in payload["counts"].items()},
        smoothing=float(payload["smoothing"]),
        window=int(payload["window"]),
    )


def save_instances(path: str | os.PathLike, instances: list[TrainingInstance]) -> int:
    return write_jsonl(
        path,
        (
            {
                "prefix": inst.prefix,
                "device_type": inst.context.device_type,
                "month": inst.context.month,
                "prev_department": inst.context.previous_query_department,
                "prev_vertical": inst.context.previous_query_vertical,
                "positive": inst.positive.query.text,
                "negatives": [n.query.text for n in inst.negatives],
            }
            for inst in instances
        ),
    )


def load_instances(path: str | os.PathLike, index: PrefixIndex) -> list[TrainingInstance]:
    def parse(rec: dict) -> TrainingInstance:
        prefix = rec["prefix"]

        def candidate(text: str) -> Candidate:
            q = index.lookup(text)
            if q is None:
                raise DatasetError(f"instance query {text!r} is not in the catalog")
            return Candidate(
                query=q, is_exact_match=text.startswith(prefix), retrieval_score=q.popularity
            )

        context = ContextSignals(
            prefix_text=prefix,
            device_type=rec["device_type"],
            month=int(rec["month"]),
            previous_query_department=rec["prev_department"],
            previous_query_vertical=rec["prev_vertical"],
        )
        return TrainingInstance(
            prefix=prefix,
            context=context,
            positive=candidate(rec["positive"]),
            negatives=tuple(candidate(t) for t in rec["negatives"]),
        )

    return load_jsonl(path, parse)
