"""Popularity-ordered top-M prefix retrieval with exact and edit-distance-1 fuzzy matching.

A query matches a typed prefix exactly when its text starts with the prefix,
and fuzzily when *some prefix of the query* is within Levenshtein distance 1
of the typed prefix (covering one insertion, deletion, or substitution).
Results are ordered by (exact-before-fuzzy, popularity desc, text asc).

The index is a character trie whose nodes carry the query ids of their
subtree pre-sorted by that global ordering, so retrieval is a walk plus a
bounded k-way merge.  Fuzzy matching walks the trie with a Levenshtein DP row
and stops at *maximal* matching nodes, whose subtrees are disjoint.  The
index is immutable after build; the internal memo caches only store derived
walk results, so concurrent readers are safe.
"""

from __future__ import annotations

import heapq
import os
import pickle
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .catalog import QueryRecord
from .errors import DatasetError, DuplicateQueryError

INDEX_MAGIC = b"QACIDX1"

_EMPTY_IDS = np.empty(0, dtype=np.int32)
_WALK_CACHE_CAP = 300_000
_MERGE_CACHE_CAP = 300_000


@dataclass(frozen=True)
class Candidate:
    """A retrieved suggestion: the catalog record plus match metadata."""

    query: QueryRecord
    is_exact_match: bool
    retrieval_score: float


class _Node:
    __slots__ = ("children", "terminal", "ids")

    def __init__(self) -> None:
        self.children: dict[str, _Node] = {}
        self.terminal: int = -1
        self.ids: np.ndarray = _EMPTY_IDS


def _assign_subtree_ids(node: _Node) -> None:
    parts = []
    if node.terminal >= 0:
        parts.append(np.array([node.terminal], dtype=np.int32))
    for child in node.children.values():
        _assign_subtree_ids(child)
        if len(child.ids):
            parts.append(child.ids)
    if parts:
        node.ids = np.sort(np.concatenate(parts)) if len(parts) > 1 else parts[0]


def _diff_iter(ids: np.ndarray, excluded: np.ndarray) -> Iterator[int]:
    """Yield values of ``ids`` not in ``excluded``; both sorted ascending, unique."""
    j = 0
    n_excl = len(excluded)
    for v in ids:
        v = int(v)
        while j < n_excl and excluded[j] < v:
            j += 1
        if j < n_excl and excluded[j] == v:
            continue
        yield v


class PrefixIndex:
    """Immutable trie over a catalog; build once, retrieve from any thread."""

    def __init__(self, records: list[QueryRecord]):
        seen: set[str] = set()
        for r in records:
            if r.text in seen:
                raise DuplicateQueryError(f"duplicate query text in catalog: {r.text!r}")
            seen.add(r.text)

        self._records = list(records)
        self._by_order = sorted(records, key=lambda r: (-r.popularity, r.text))
        self._order_of_text = {r.text: i for i, r in enumerate(self._by_order)}

        self._root = _Node()
        for order_idx, rec in enumerate(self._by_order):
            node = self._root
            for ch in rec.text:
                node = node.children.setdefault(ch, _Node())
            node.terminal = order_idx
        _assign_subtree_ids(self._root)

        self._walk_cache: dict[str, tuple[_Node | None, tuple[tuple[str, _Node], ...]]] = {}
        self._merge_cache: dict[tuple[str, int], tuple[np.ndarray, int]] = {}

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[QueryRecord]:
        return list(self._records)

    def lookup(self, text: str) -> QueryRecord | None:
        i = self._order_of_text.get(text)
        return None if i is None else self._by_order[i]

    def order_index(self, text: str) -> int | None:
        """Position of a query in the global (popularity desc, text asc) order."""
        return self._order_of_text.get(text)

    def record_at(self, order_idx: int) -> QueryRecord:
        return self._by_order[order_idx]

    def _walk(self, prefix: str) -> tuple[_Node | None, tuple[tuple[str, _Node], ...]]:
        cached = self._walk_cache.get(prefix)
        if cached is not None:
            return cached

        node: _Node | None = self._root
        for ch in prefix:
            node = node.children.get(ch)  # type: ignore[union-attr]
            if node is None:
                break
        exact = node

        n = len(prefix)
        accepting: list[tuple[str, _Node]] = []
        stack: list[tuple[_Node, str, list[int]]] = [(self._root, "", list(range(n + 1)))]
        while stack:
            cur, path, row = stack.pop()
            if row[n] <= 1:
                accepting.append((path, cur))
                continue
            for ch, child in cur.children.items():
                prev = row
                new = [prev[0] + 1]
                best = new[0]
                for j in range(1, n + 1):
                    cost = min(
                        prev[j] + 1,
                        new[j - 1] + 1,
                        prev[j - 1] + (0 if ch == prefix[j - 1] else 1),
                    )
                    new.append(cost)
                    if cost < best:
                        best = cost
                if best <= 1:
                    stack.append((child, path + ch, new))

        result = (exact, tuple(accepting))
        if len(self._walk_cache) < _WALK_CACHE_CAP:
            self._walk_cache[prefix] = result
        return result

    def retrieve_ids(self, prefix: str, m: int) -> tuple[np.ndarray, int]:
        """Top-``m`` query order-indices for ``prefix``; returns (ids, n_exact).

        ``ids[:n_exact]`` start with the prefix verbatim, the rest are fuzzy
        matches; within each group ids ascend, which is popularity-descending
        with a text tiebreak.
        """
        if not prefix:
            raise ValueError("prefix must be non-empty")
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")

        key = (prefix, m)
        cached = self._merge_cache.get(key)
        if cached is not None:
            return cached

        exact_node, accepting = self._walk(prefix)
        exact_ids = exact_node.ids if exact_node is not None else _EMPTY_IDS
        n_exact = min(len(exact_ids), m)
        out: list[int] = [int(v) for v in exact_ids[:n_exact]]

        need = m - n_exact
        if need > 0 and accepting:
            streams = []
            for path, node in accepting:
                if exact_node is not None and len(path) <= len(prefix) and prefix.startswith(path):
                    if node is exact_node:
                        continue
                    streams.append(_diff_iter(node.ids, exact_ids))
                else:
                    streams.append(iter(node.ids))
            for v in heapq.merge(*streams):
                out.append(int(v))
                need -= 1
                if need == 0:
                    break

        result = (np.asarray(out, dtype=np.int32), n_exact)
        if len(self._merge_cache) < _MERGE_CACHE_CAP:
            self._merge_cache[key] = result
        return result

    def retrieve(self, prefix: str, m: int) -> list[Candidate]:
        """Top-``m`` candidates ordered by (exact desc, popularity desc, text asc)."""
        ids, n_exact = self.retrieve_ids(prefix, m)
        by_order = self._by_order
        return [
            Candidate(
                query=by_order[i],
                is_exact_match=pos < n_exact,
                retrieval_score=by_order[i].popularity,
            )
            for pos, i in enumerate(ids)
        ]


def build_index(records: list[QueryRecord]) -> PrefixIndex:
    return PrefixIndex(records)


def save_index(path: str | os.PathLike, index: PrefixIndex) -> None:
    payload = [
        (r.text, r.popularity, r.department, r.vertical, r.seasonal_boost)
        for r in index.records
    ]
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(pickle.dumps({"version": 1, "records": payload}, protocol=4))


def load_index(path: str | os.PathLike) -> PrefixIndex:
    with open(path, "rb") as fh:
        magic = fh.read(len(INDEX_MAGIC))
        if magic != INDEX_MAGIC:
            raise DatasetError(f"{os.fspath(path)}: not an index file (bad magic {magic!r})")
        payload = pickle.loads(fh.read())
    records = [
        QueryRecord(text=t, popularity=p, department=d, vertical=v, seasonal_boost=tuple(b))
        for t, p, d, v, b in payload["records"]
    ]
    return PrefixIndex(records)
