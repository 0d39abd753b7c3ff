"""Line-delimited JSON helpers used by every file format in the package."""

from __future__ import annotations

import json
import os
from typing import Any, Callable, Iterable, Iterator

from .errors import DatasetError


def write_jsonl(path: str | os.PathLike, records: Iterable[dict[str, Any]]) -> int:
    """Write one compact JSON object per line. Returns the number of lines."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":"), sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | os.PathLike) -> Iterator[dict[str, Any]]:
    """Yield parsed objects; malformed lines raise DatasetError naming path and line."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{os.fspath(path)}:{lineno}: malformed record: {exc}") from exc


def load_jsonl(path: str | os.PathLike, parse: Callable[[dict[str, Any]], Any]) -> list[Any]:
    """Read a whole file through a per-record parser."""
    out = []
    for lineno, rec in enumerate(read_jsonl(path), start=1):
        try:
            out.append(parse(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{os.fspath(path)}:{lineno}: bad record: {exc}") from exc
    return out
