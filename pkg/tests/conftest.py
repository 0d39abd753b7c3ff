"""Shared fixtures: tiny hand-built catalogs and random-catalog helpers."""

from __future__ import annotations

import numpy as np
import pytest

from qacrank.catalog import QueryRecord, generate_catalog
from qacrank.features import ContextSignals
from qacrank.index import Candidate, build_index

FLAT_SEASON = tuple(1.0 for _ in range(12))


def make_record(
    text: str,
    popularity: float,
    department: int = 0,
    vertical: int = 0,
    seasonal_boost: tuple[float, ...] = FLAT_SEASON,
) -> QueryRecord:
    return QueryRecord(
        text=text,
        popularity=popularity,
        department=department,
        vertical=vertical,
        seasonal_boost=seasonal_boost,
    )


@pytest.fixture
def prefix_family_catalog() -> list[QueryRecord]:
    """Three queries sharing the 'black leather' prefix, jacket most popular."""
    return [
        make_record("black leather jacket", 0.9, department=0, vertical=0),
        make_record("black leather boots", 0.5, department=1, vertical=0),
        make_record("black leather gloves", 0.3, department=2, vertical=1),
    ]


@pytest.fixture
def prefix_family_index(prefix_family_catalog):
    return build_index(prefix_family_catalog)


@pytest.fixture
def small_catalog() -> list[QueryRecord]:
    return generate_catalog(300, seed=11)


@pytest.fixture
def small_index(small_catalog):
    return build_index(small_catalog)


def make_context(
    prefix: str = "bl",
    device: str = "desktop_browser",
    month: int = 6,
    prev_dept: int | None = None,
    prev_vert: int | None = None,
) -> ContextSignals:
    return ContextSignals(
        prefix_text=prefix,
        device_type=device,
        month=month,
        previous_query_department=prev_dept,
        previous_query_vertical=prev_vert,
    )


def make_candidate(record: QueryRecord, prefix: str) -> Candidate:
    return Candidate(
        query=record,
        is_exact_match=record.text.startswith(prefix),
        retrieval_score=record.popularity,
    )


def random_catalog(rng: np.random.Generator, n: int, alphabet: str = "abc") -> list[QueryRecord]:
    """Random catalog over a tiny alphabet so fuzzy collisions are common."""
    texts: set[str] = set()
    attempts = 0
    while len(texts) < n and attempts < 200 * n + 100:
        attempts += 1
        n_tokens = int(rng.integers(1, 3))
        words = [
            "".join(rng.choice(list(alphabet), size=int(rng.integers(1, 7))))
            for _ in range(n_tokens)
        ]
        texts.add(" ".join(words))
    records = []
    for text in sorted(texts):
        records.append(
            make_record(
                text,
                popularity=float(rng.uniform(0.01, 10.0)),
                department=int(rng.integers(3)),
                vertical=int(rng.integers(2)),
            )
        )
    return records


def random_prefix(rng: np.random.Generator, records, alphabet: str = "abc") -> str:
    """A prefix of a random catalog query with 0-2 random edits applied."""
    text = records[int(rng.integers(len(records)))].text
    k = int(rng.integers(1, len(text) + 1))
    prefix = list(text[:k])
    for _ in range(int(rng.integers(0, 3))):
        op = rng.integers(3)
        pos = int(rng.integers(len(prefix))) if prefix else 0
        ch = str(rng.choice(list(alphabet + " ")))
        if op == 0 and len(prefix) > 1:
            del prefix[pos]
        elif op == 1:
            prefix.insert(pos, ch)
        else:
            if prefix:
                prefix[pos] = ch
    out = "".join(prefix).strip()
    return out if out else text[:1]
