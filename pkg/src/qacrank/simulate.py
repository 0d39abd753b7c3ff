"""User simulation: plain search logs and position-biased autocomplete engagement.

Search logs sample queries in proportion to popularity times the month's
seasonal multiplier — they stand in for what users wanted with no suggestion
UI influencing them.  Autocomplete sessions give each simulated user an
intended query drawn from the same distribution; the user types it one
character at a time, a ranker orders the retrieved candidates at every
keystroke, and a rank-discounted examination model decides whether the
intended suggestion gets seen and clicked.  Users who reach the end of their
query without clicking abandon (their intent shows up only in search logs),
so the emitted engagement entries carry exactly the presentation bias a live
system would: popular, highly ranked intents are over-represented and
surface at shorter prefixes.

Everything is driven by one seeded generator, so identical configurations
produce byte-identical logs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .catalog import QueryRecord
from .errors import ConfigurationError, DatasetError
from .features import DEVICE_TYPES, ContextSignals
from .index import PrefixIndex
from .jsonl import load_jsonl, write_jsonl
from .ranker import SuggestionRanker

DEFAULT_DEVICE_MIX = {
    "ios_app": 0.30,
    "android_app": 0.30,
    "desktop_browser": 0.25,
    "mobile_browser": 0.15,
}


@dataclass(frozen=True)
class SearchLogEntry:
    """One query issued outside the autocomplete flow."""

    query_text: str
    session_id: str
    previous_query_text: str | None
    device_type: str
    month: int

    def __post_init__(self) -> None:
        if self.device_type not in DEVICE_TYPES:
            raise DatasetError(f"unknown device_type {self.device_type!r}")
        if not 1 <= self.month <= 12:
            raise DatasetError(f"month must be in 1..12, got {self.month}")


@dataclass(frozen=True)
class QACEngagementEntry:
    """One autocomplete interaction: typed prefix, shown list, and the click."""

    prefix: str
    shown: tuple[str, ...]
    clicked: str
    clicked_rank: int
    session_id: str
    previous_query_text: str | None
    device_type: str
    month: int

    def __post_init__(self) -> None:
        if self.device_type not in DEVICE_TYPES:
            raise DatasetError(f"unknown device_type {self.device_type!r}")
        if not 1 <= self.month <= 12:
            raise DatasetError(f"month must be in 1..12, got {self.month}")
        if not (1 <= self.clicked_rank <= len(self.shown)):
            raise DatasetError(f"clicked_rank {self.clicked_rank} outside shown list")
        if self.shown[self.clicked_rank - 1] != self.clicked:
            raise DatasetError("shown[clicked_rank - 1] must equal the clicked query")
        if not (1 <= len(self.prefix) <= len(self.clicked)):
            raise DatasetError("prefix must be non-empty and no longer than the clicked query")


@dataclass(frozen=True)
class ClickModelConfig:
    """Rank-discounted examination: P(examine rank r) = examine_decay**(r-1).

    ``settle_prob`` is the chance that an examined suggestion which merely
    resembles the intent (same department, completes the typed prefix) gets
    clicked instead of the intended query.  Settling is what turns ranking
    preference into label preference: clicks drift toward whatever the
    incumbent ranked highly, not just toward what users wanted.  Zero keeps
    clicks purely intentional.
    """

    examine_decay: float = 0.7
    accept_if_intended: float = 0.85
    rng_seed: int = 0
    settle_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.examine_decay <= 1.0:
            raise ConfigurationError("examine_decay must be in (0, 1]")
        if not 0.0 < self.accept_if_intended <= 1.0:
            raise ConfigurationError("accept_if_intended must be in (0, 1]")
        if not 0.0 <= self.settle_prob < 1.0:
            raise ConfigurationError("settle_prob must be in [0, 1)")


@dataclass
class QacSimStats:
    """Per-rank impression/click tallies collected while simulating sessions.

    ``impressions``/``clicks`` track the intended query's position; settled
    clicks (on a substitute suggestion) are counted separately.
    """

    impressions: dict[int, int] = field(default_factory=dict)
    clicks: dict[int, int] = field(default_factory=dict)
    users: int = 0
    abandoned: int = 0
    settled: int = 0

    def click_rate(self, rank: int) -> float:
        seen = self.impressions.get(rank, 0)
        return self.clicks.get(rank, 0) / seen if seen else float("nan")


class _CatalogSampler:
    """Popularity x seasonality x device-affinity sampling, global or per-department.

    ``device_affinity`` in [0, 1) tilts intent toward departments that suit
    the device (alternating by department/device parity): users on different
    devices want different things, which only an interaction of the device
    and department signals can capture.  Zero keeps the marginal exactly
    popularity x seasonality.
    """

    def __init__(
        self,
        records: list[QueryRecord],
        rng: np.random.Generator,
        device_affinity: float = 0.0,
    ):
        if not records:
            raise DatasetError("catalog is empty")
        if not 0.0 <= device_affinity < 1.0:
            raise ConfigurationError("device_affinity must be in [0, 1)")
        self._records = records
        self._rng = rng
        self._affinity = device_affinity
        self._pop = np.array([r.popularity for r in records])
        self._boost = np.array([r.seasonal_boost for r in records])
        self._dept = np.array([r.department for r in records])
        members: dict[int, list[int]] = {}
        for i, r in enumerate(records):
            members.setdefault(r.department, []).append(i)
        self._by_dept = {d: np.asarray(v, dtype=np.int64) for d, v in members.items()}
        self._global_cdf: dict[tuple[int, int], np.ndarray] = {}
        self._dept_cdf: dict[tuple[int, int], np.ndarray] = {}

    def _device_weights(self, device: str | None) -> np.ndarray | None:
        if self._affinity == 0.0 or device is None:
            return None
        j = DEVICE_TYPES.index(device)
        sign = np.where((self._dept + j) % 2 == 0, 1.0, -1.0)
        return 1.0 + self._affinity * sign

    def sample(self, month: int, device: str | None = None) -> QueryRecord:
        key = (month, -1 if device is None or self._affinity == 0.0
               else DEVICE_TYPES.index(device))
        cdf = self._global_cdf.get(key)
        if cdf is None:
            w = self._pop * self._boost[:, month - 1]
            aff = self._device_weights(device)
            if aff is not None:
                w = w * aff
            cdf = np.cumsum(w / w.sum())
            self._global_cdf[key] = cdf
        i = int(np.searchsorted(cdf, self._rng.random(), side="right"))
        return self._records[min(i, len(self._records) - 1)]

    def sample_in_department(self, dept: int, month: int) -> QueryRecord:
        # device affinity is constant within a department, so it cancels here
        members = self._by_dept.get(dept)
        if members is None:
            return self.sample(month)
        cdf = self._dept_cdf.get((dept, month))
        if cdf is None:
            w = self._pop[members] * self._boost[members, month - 1]
            cdf = np.cumsum(w / w.sum())
            self._dept_cdf[(dept, month)] = cdf
        i = int(np.searchsorted(cdf, self._rng.random(), side="right"))
        return self._records[int(members[min(i, len(members) - 1)])]


def _pick_device(rng: np.random.Generator, mix: dict[str, float]) -> str:
    names = list(mix)
    probs = np.array([mix[n] for n in names])
    return names[int(rng.choice(len(names), p=probs / probs.sum()))]


def simulate_search_logs(
    catalog: list[QueryRecord],
    n_entries: int,
    month: int | None,
    seed: int,
    *,
    device_mix: dict[str, float] | None = None,
    session_continue: float = 0.5,
    topic_coherence: float = 0.7,
    device_affinity: float = 0.0,
) -> list[SearchLogEntry]:
    """Sample sessions of geometric length; ``month=None`` draws one per session.

    Within a session, follow-up queries stay in the previous query's
    department with probability ``topic_coherence``.
    """
    if n_entries < 0:
        raise ConfigurationError("n_entries must be >= 0")
    rng = np.random.default_rng(seed)
    sampler = _CatalogSampler(catalog, rng, device_affinity)
    mix = device_mix or DEFAULT_DEVICE_MIX

    entries: list[SearchLogEntry] = []
    session_no = 0
    while len(entries) < n_entries:
        session_no += 1
        session_id = f"s{seed}-{session_no}"
        m = int(rng.integers(1, 13)) if month is None else month
        device = _pick_device(rng, mix)
        prev: QueryRecord | None = None
        while len(entries) < n_entries:
            if prev is not None and rng.random() < topic_coherence:
                rec = sampler.sample_in_department(prev.department, m)
            else:
                rec = sampler.sample(m, device)
            entries.append(
                SearchLogEntry(
                    query_text=rec.text,
                    session_id=session_id,
                    previous_query_text=None if prev is None else prev.text,
                    device_type=device,
                    month=m,
                )
            )
            prev = rec
            if rng.random() >= session_continue:
                break
    return entries


def simulate_qac_sessions(
    catalog: list[QueryRecord],
    ranker: SuggestionRanker,
    index: PrefixIndex,
    click_model: ClickModelConfig,
    n_entries: int,
    seed: int,
    *,
    n_shown: int = 10,
    retrieval_m: int = 50,
    month: int | None = None,
    prev_query_prob: float = 0.5,
    topic_coherence: float = 0.7,
    device_mix: dict[str, float] | None = None,
    device_affinity: float = 0.0,
    n_shown_by_device: dict[str, int] | None = None,
    stats: QacSimStats | None = None,
    max_users: int | None = None,
) -> list[QACEngagementEntry]:
    """Emit ``n_entries`` clicked autocomplete interactions under the given ranker.

    Each user types their intended query character by character; at every
    keystroke the top ``retrieval_m`` candidates are ranked and the first
    ``n_shown`` displayed (smaller screens can show fewer via
    ``n_shown_by_device``).  The intended suggestion at rank r is examined
    with probability ``examine_decay**(r-1)`` and clicked with probability
    ``accept_if_intended`` once examined.  Users who never click produce no
    engagement entry.
    """
    if n_shown < 1 or retrieval_m < n_shown:
        raise ConfigurationError("need 1 <= n_shown <= retrieval_m")
    shown_of = dict.fromkeys(DEVICE_TYPES, n_shown)
    if n_shown_by_device:
        for dev, k in n_shown_by_device.items():
            if dev not in DEVICE_TYPES:
                raise ConfigurationError(f"unknown device_type {dev!r}")
            if not 1 <= k <= retrieval_m:
                raise ConfigurationError("need 1 <= n_shown <= retrieval_m per device")
            shown_of[dev] = k
    rng = np.random.default_rng(seed)
    click_rng = np.random.default_rng(click_model.rng_seed)
    sampler = _CatalogSampler(catalog, rng, device_affinity)
    mix = device_mix or DEFAULT_DEVICE_MIX
    fast_path = bool(getattr(ranker, "preserves_retrieval_order", False))
    limit = max_users if max_users is not None else 200 * n_entries + 1000

    entries: list[QACEngagementEntry] = []
    users = 0
    while len(entries) < n_entries:
        users += 1
        if users > limit:
            raise ConfigurationError(
                f"simulated {users - 1} users but produced only {len(entries)} of "
                f"{n_entries} entries; click model too strict?"
            )
        m = int(rng.integers(1, 13)) if month is None else month
        device = _pick_device(rng, mix)
        n_device_shown = shown_of[device]
        intended = sampler.sample(m, device)
        prev: QueryRecord | None = None
        if rng.random() < prev_query_prob:
            if rng.random() < topic_coherence:
                prev = sampler.sample_in_department(intended.department, m)
            else:
                prev = sampler.sample(m, device)
        session_id = f"q{seed}-{users}"
        if stats is not None:
            stats.users += 1

        intended_oid = index.order_index(intended.text)
        decay = click_model.examine_decay
        accept = click_model.accept_if_intended
        settle = click_model.settle_prob
        clicked = False
        for k in range(1, len(intended.text) + 1):
            prefix = intended.text[:k]
            if fast_path:
                shown_oids, _ = index.retrieve_ids(prefix, n_device_shown)
                shown_records = None
            else:
                context = ContextSignals(
                    prefix_text=prefix,
                    device_type=device,
                    month=m,
                    previous_query_department=None if prev is None else prev.department,
                    previous_query_vertical=None if prev is None else prev.vertical,
                )
                candidates = index.retrieve(prefix, retrieval_m)
                top = ranker.score_candidates(candidates, context)[:n_device_shown]
                shown_records = [c.query for c, _ in top]
                shown_oids = None

            n_list = len(shown_records if shown_oids is None else shown_oids)

            def record_at_pos(pos: int) -> QueryRecord:
                if shown_records is not None:
                    return shown_records[pos]
                return index.record_at(int(shown_oids[pos]))

            intended_pos = -1
            if shown_oids is not None:
                hit = np.nonzero(shown_oids == intended_oid)[0]
                intended_pos = int(hit[0]) if len(hit) else -1
            else:
                for pos, rec in enumerate(shown_records):
                    if rec.text == intended.text:
                        intended_pos = pos
                        break
            if stats is not None and intended_pos >= 0:
                r = intended_pos + 1
                stats.impressions[r] = stats.impressions.get(r, 0) + 1

            clicked_pos = -1
            if settle == 0.0:
                # only the intended suggestion can be clicked
                if (
                    intended_pos >= 0
                    and click_rng.random() < decay**intended_pos
                    and click_rng.random() < accept
                ):
                    clicked_pos = intended_pos
            else:
                # walk the list top-down; a resembling suggestion examined on
                # the way may capture the click before the intended one does
                for pos in range(n_list):
                    if click_rng.random() >= decay**pos:
                        continue
                    if pos == intended_pos:
                        if click_rng.random() < accept:
                            clicked_pos = pos
                            break
                    else:
                        rec = record_at_pos(pos)
                        if (
                            rec.department == intended.department
                            and rec.text.startswith(prefix)
                            and click_rng.random() < settle
                        ):
                            clicked_pos = pos
                            break
            if clicked_pos < 0:
                continue

            clicked_rec = record_at_pos(clicked_pos)
            if shown_records is not None:
                shown_texts = tuple(rec.text for rec in shown_records)
            else:
                shown_texts = tuple(index.record_at(int(i)).text for i in shown_oids)
            entries.append(
                QACEngagementEntry(
                    prefix=prefix,
                    shown=shown_texts,
                    clicked=clicked_rec.text,
                    clicked_rank=clicked_pos + 1,
                    session_id=session_id,
                    previous_query_text=None if prev is None else prev.text,
                    device_type=device,
                    month=m,
                )
            )
            if stats is not None:
                if clicked_pos == intended_pos:
                    r = clicked_pos + 1
                    stats.clicks[r] = stats.clicks.get(r, 0) + 1
                else:
                    stats.settled += 1
            clicked = True
            break
        if not clicked and stats is not None:
            stats.abandoned += 1
    return entries


def save_search_logs(path: str | os.PathLike, entries: list[SearchLogEntry]) -> int:
    return write_jsonl(
        path,
        (
            {
                "query_text": e.query_text,
                "session_id": e.session_id,
                "previous_query_text": e.previous_query_text,
                "device_type": e.device_type,
                "month": e.month,
            }
            for e in entries
        ),
    )


def load_search_logs(path: str | os.PathLike) -> list[SearchLogEntry]:
    return load_jsonl(
        path,
        lambda rec: SearchLogEntry(
            query_text=rec["query_text"],
            session_id=rec["session_id"],
            previous_query_text=rec["previous_query_text"],
            device_type=rec["device_type"],
            month=int(rec["month"]),
        ),
    )


def save_engagement_logs(path: str | os.PathLike, entries: list[QACEngagementEntry]) -> int:
    return write_jsonl(
        path,
        (
            {
                "prefix": e.prefix,
                "shown": list(e.shown),
                "clicked": e.clicked,
                "clicked_rank": e.clicked_rank,
                "session_id": e.session_id,
                "previous_query_text": e.previous_query_text,
                "device_type": e.device_type,
                "month": e.month,
            }
            for e in entries
        ),
    )


def load_engagement_logs(path: str | os.PathLike) -> list[QACEngagementEntry]:
    return load_jsonl(
        path,
        lambda rec: QACEngagementEntry(
            prefix=rec["prefix"],
            shown=tuple(rec["shown"]),
            clicked=rec["clicked"],
            clicked_rank=int(rec["clicked_rank"]),
            session_id=rec["session_id"],
            previous_query_text=rec["previous_query_text"],
            device_type=rec["device_type"],
            month=int(rec["month"]),
        ),
    )
