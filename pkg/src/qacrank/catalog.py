"""Synthetic query catalog: records, Zipf popularity, and vocabulary-based text generation.

Query texts are multi-token phrases assembled from small token pools so that
realistic shared-prefix families occur ("black leather jacket" / "black leather
boots").  Each head noun belongs to a department, departments group into
verticals, which gives the contextual match features something to learn.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .jsonl import load_jsonl, write_jsonl

MONTHS = 12

COLORS = [
    "black", "white", "red", "blue", "green", "navy",
    "grey", "brown", "pink", "purple", "beige", "teal",
]
MATERIALS = [
    "leather", "cotton", "wool", "denim", "silk",
    "canvas", "velvet", "linen", "fleece", "suede",
]
MODIFIERS = [
    "slim", "large", "small", "mini", "classic",
    "wireless", "portable", "organic", "vintage", "waterproof",
]
SUFFIXES = ["for men", "for women", "for kids", "set", "case", "sale"]

# Head nouns grouped by department family; a query's department is its noun's
# group (modulo the configured department count), verticals group departments.
NOUN_FAMILIES = [
    ["jacket", "jeans", "hoodie", "dress", "skirt", "sweater"],
    ["boots", "sneakers", "sandals", "loafers", "heels", "slippers"],
    ["gloves", "scarf", "belt", "wallet", "handbag", "sunglasses"],
    ["headphones", "laptop", "tablet", "speaker", "charger", "monitor"],
    ["sofa", "lamp", "curtains", "rug", "pillow", "blanket"],
    ["blender", "toaster", "kettle", "cookware", "grater", "mixer"],
    ["bicycle", "dumbbells", "treadmill", "racket", "helmet", "skates"],
    ["puzzle", "doll", "blocks", "scooter", "drone", "boardgame"],
    ["shovel", "planter", "hose", "trimmer", "seeds", "lantern"],
    ["shampoo", "lipstick", "perfume", "lotion", "mascara", "razor"],
    ["coffee", "chocolate", "pasta", "honey", "granola", "tea"],
    ["notebook", "stapler", "marker", "folder", "desk", "chair"],
]


@dataclass(frozen=True)
class QueryRecord:
    """One catalog entry: a full query with its sampling weight and category ids."""

    text: str
    popularity: float
    department: int
    vertical: int
    seasonal_boost: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.text or self.text != self.text.strip():
            raise ConfigurationError(f"query text must be non-empty and trimmed: {self.text!r}")
        if len(self.text) > 64 or self.text != self.text.lower():
            raise ConfigurationError(f"query text must be lowercase and <= 64 chars: {self.text!r}")
        if self.popularity <= 0:
            raise ConfigurationError(f"popularity must be > 0, got {self.popularity}")
        if len(self.seasonal_boost) != MONTHS or any(b <= 0 for b in self.seasonal_boost):
            raise ConfigurationError("seasonal_boost needs 12 positive multipliers")


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return 1.0 / np.power(ranks, exponent)


def _pool_pick(rng: np.random.Generator, pool: list[str], skew: float = 1.2) -> str:
    """Zipf-skewed pick so early pool entries dominate and prefixes collide."""
    w = _zipf_weights(len(pool), skew)
    return pool[int(rng.choice(len(pool), p=w / w.sum()))]


def _phrase(rng: np.random.Generator) -> tuple[str, str]:
    """Return (text, head noun). Template mix keeps 1-4 token phrases."""
    family = int(rng.integers(len(NOUN_FAMILIES)))
    noun = _pool_pick(rng, NOUN_FAMILIES[family], skew=0.8)
    roll = rng.random()
    if roll < 0.30:
        words = [_pool_pick(rng, COLORS), _pool_pick(rng, MATERIALS), noun]
    elif roll < 0.55:
        words = [_pool_pick(rng, COLORS), noun]
    elif roll < 0.70:
        words = [_pool_pick(rng, MATERIALS), noun]
    elif roll < 0.85:
        words = [_pool_pick(rng, MODIFIERS), noun]
    else:
        words = [noun]
    if rng.random() < 0.15:
        words.append(_pool_pick(rng, SUFFIXES))
    return " ".join(words), noun


def generate_catalog(
    n_queries: int,
    n_departments: int = len(NOUN_FAMILIES),
    n_verticals: int = 4,
    zipf_exponent: float = 1.0,
    seed: int = 0,
    seasonal_amplitude: float = 0.8,
) -> list[QueryRecord]:
    """Generate ``n_queries`` unique queries with Zipf(exponent) popularity weights.

    Deterministic for a fixed seed.  The popularity of the rank-r query is
    exactly ``1 / r**zipf_exponent``, assigned to queries in a random order.
    Each query gets a sinusoidal seasonal profile whose log amplitude is
    uniform on [0, seasonal_amplitude].
    """
    if n_queries < 1:
        raise ConfigurationError(f"n_queries must be >= 1, got {n_queries}")
    if n_departments < 1 or n_verticals < 1 or n_verticals > n_departments:
        raise ConfigurationError(
            f"need 1 <= n_verticals <= n_departments, got {n_departments}/{n_verticals}"
        )
    if zipf_exponent <= 0:
        raise ConfigurationError(f"zipf_exponent must be > 0, got {zipf_exponent}")
    if seasonal_amplitude < 0:
        raise ConfigurationError(f"seasonal_amplitude must be >= 0, got {seasonal_amplitude}")

    rng = np.random.default_rng(seed)
    noun_dept = {
        noun: fam_idx % n_departments
        for fam_idx, family in enumerate(NOUN_FAMILIES)
        for noun in family
    }

    texts: list[str] = []
    depts: list[int] = []
    seen: set[str] = set()
    attempts = 0
    budget = 200 * n_queries + 1000
    while len(texts) < n_queries:
        attempts += 1
        if attempts > budget:
            raise ConfigurationError(
                f"could not generate {n_queries} unique queries (vocabulary exhausted)"
            )
        text, noun = _phrase(rng)
        if text in seen:
            continue
        seen.add(text)
        texts.append(text)
        depts.append(noun_dept[noun])

    weights = _zipf_weights(n_queries, zipf_exponent)
    order = rng.permutation(n_queries)

    records = []
    for i in range(n_queries):
        amp = float(rng.uniform(0.0, seasonal_amplitude))
        peak = int(rng.integers(1, MONTHS + 1))
        boost = tuple(
            math.exp(amp * math.cos(2.0 * math.pi * (m - peak) / MONTHS))
            for m in range(1, MONTHS + 1)
        )
        dept = depts[i]
        records.append(
            QueryRecord(
                text=texts[i],
                popularity=float(weights[order[i]]),
                department=dept,
                vertical=dept * n_verticals // n_departments,
                seasonal_boost=boost,
            )
        )
    return records


def save_catalog(path: str | os.PathLike, records: list[QueryRecord]) -> int:
    return write_jsonl(
        path,
        (
            {
                "text": r.text,
                "popularity": r.popularity,
                "department": r.department,
                "vertical": r.vertical,
                "seasonal_boost": list(r.seasonal_boost),
            }
            for r in records
        ),
    )


def load_catalog(path: str | os.PathLike) -> list[QueryRecord]:
    return load_jsonl(
        path,
        lambda rec: QueryRecord(
            text=rec["text"],
            popularity=float(rec["popularity"]),
            department=int(rec["department"]),
            vertical=int(rec["vertical"]),
            seasonal_boost=tuple(float(b) for b in rec["seasonal_boost"]),
        ),
    )
