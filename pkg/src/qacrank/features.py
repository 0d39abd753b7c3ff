"""Fixed-length feature encoding of (prefix, candidate, context) plus scalar standardization.

Vector layout (version 1), in order:

* 6 scalars: log popularity, log seasonal multiplier for the current month,
  query length in characters, query token count, prefix length in
  characters, prefix token count
* 3 booleans: exact-match flag, department match with the previous query,
  vertical match with the previous query
* one-hot department of the candidate query
* one-hot vertical of the candidate query
* one-hot device type (4 values)

Popularity and the seasonal multiplier are multiplicative sampling weights,
so they enter in log scale: raw Zipf weights span several orders of
magnitude and would dwarf every other standardized feature.  Standardization
(population mean/std) touches the scalar block only; a constant feature gets
std 1 so the transform stays invertible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .catalog import QueryRecord
from .errors import DatasetError, LayoutMismatchError
from .index import Candidate

LAYOUT_VERSION = 1
N_SCALARS = 6
N_BOOLS = 3

DEVICE_TYPES = ("ios_app", "android_app", "desktop_browser", "mobile_browser")
_DEVICE_SLOT = {d: i for i, d in enumerate(DEVICE_TYPES)}


def token_count(text: str) -> int:
    """Tokens are maximal runs of non-space characters."""
    return len(text.split())


@dataclass(frozen=True)
class ContextSignals:
    """Request-side signals shared by every candidate of one ranking event."""

    prefix_text: str
    device_type: str
    month: int
    previous_query_department: int | None = None
    previous_query_vertical: int | None = None

    def __post_init__(self) -> None:
        if self.device_type not in _DEVICE_SLOT:
            raise DatasetError(f"unknown device_type {self.device_type!r}")
        if not 1 <= self.month <= 12:
            raise DatasetError(f"month must be in 1..12, got {self.month}")


@dataclass(frozen=True)
class FeatureLayout:
    """Dimensions of the feature vector; fixed by the catalog's category counts."""

    n_departments: int
    n_verticals: int
    version: int = LAYOUT_VERSION

    @property
    def n_features(self) -> int:
        return N_SCALARS + N_BOOLS + self.n_departments + self.n_verticals + len(DEVICE_TYPES)

    @classmethod
    def from_records(cls, records: list[QueryRecord]) -> "FeatureLayout":
        if not records:
            raise DatasetError("cannot infer feature layout from an empty catalog")
        return cls(
            n_departments=max(r.department for r in records) + 1,
            n_verticals=max(r.vertical for r in records) + 1,
        )

    def check_compatible(self, other: "FeatureLayout") -> None:
        if self != other:
            raise LayoutMismatchError(f"feature layout mismatch: {self} vs {other}")


class FeatureExtractor:
    """Stateless (prefix, candidate, context) -> vector encoder for one layout."""

    def __init__(self, layout: FeatureLayout):
        self.layout = layout
        self._dept_base = N_SCALARS + N_BOOLS
        self._vert_base = self._dept_base + layout.n_departments
        self._device_base = self._vert_base + layout.n_verticals

    def extract(self, candidate: Candidate, context: ContextSignals) -> np.ndarray:
        return self.extract_matrix([candidate], context)[0]

    def extract_matrix(self, candidates: list[Candidate], context: ContextSignals) -> np.ndarray:
        """Encode all candidates of one event; rows align with the input order."""
        n = len(candidates)
        out = np.zeros((n, self.layout.n_features), dtype=np.float64)
        month_idx = context.month - 1
        prefix_len = float(len(context.prefix_text))
        prefix_tokens = float(token_count(context.prefix_text))
        prev_dept = context.previous_query_department
        prev_vert = context.previous_query_vertical

        for i, cand in enumerate(candidates):
            q = cand.query
            row = out[i]
            row[0] = np.log(q.popularity)
            row[1] = np.log(q.seasonal_boost[month_idx])
            row[2] = float(len(q.text))
            row[3] = float(token_count(q.text))
            row[4] = prefix_len
            row[5] = prefix_tokens
            row[6] = 1.0 if cand.is_exact_match else 0.0
            row[7] = 1.0 if prev_dept is not None and q.department == prev_dept else 0.0
            row[8] = 1.0 if prev_vert is not None and q.vertical == prev_vert else 0.0
            row[self._dept_base + q.department] = 1.0
            row[self._vert_base + q.vertical] = 1.0
            row[self._device_base + _DEVICE_SLOT[context.device_type]] = 1.0
        return out


@dataclass(frozen=True)
class ScalerStats:
    """Per-scalar mean and population std fitted on training features."""

    means: tuple[float, ...]
    stds: tuple[float, ...]
    layout_version: int = LAYOUT_VERSION


class ScalarStandardizer(BaseEstimator, TransformerMixin):
    """Standardizes the scalar block of feature matrices, leaving the rest intact.

    Follows the fit/transform estimator contract; ``stats_`` holds the fitted
    ScalerStats so it can ride along with saved models.
    """

    def __init__(self, layout_version: int = LAYOUT_VERSION):
        self.layout_version = layout_version

    def fit(self, X: np.ndarray, y: object = None) -> "ScalarStandardizer":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DatasetError("scaler needs a non-empty 2-d feature matrix")
        means = X[:, :N_SCALARS].mean(axis=0)
        stds = X[:, :N_SCALARS].std(axis=0)
        stds = np.where(stds > 0.0, stds, 1.0)
        self.stats_ = ScalerStats(
            means=tuple(float(v) for v in means),
            stds=tuple(float(v) for v in stds),
            layout_version=self.layout_version,
        )
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return apply_scaler(self._stats(), X)

    def inverse_transform(self, X: np.ndarray) -> np.ndarray:
        stats = self._stats()
        out = np.array(X, dtype=np.float64, copy=True)
        out[:, :N_SCALARS] = out[:, :N_SCALARS] * np.asarray(stats.stds) + np.asarray(stats.means)
        return out

    def _stats(self) -> ScalerStats:
        stats = getattr(self, "stats_", None)
        if stats is None:
            raise NotFittedError("ScalarStandardizer is not fitted yet")
        return stats


def fit_scaler(rows: np.ndarray | list[np.ndarray]) -> ScalerStats:
    """Fit scalar means/stds over a dataset of feature vectors."""
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    return ScalarStandardizer().fit(X).stats_


def apply_scaler(stats: ScalerStats, X: np.ndarray) -> np.ndarray:
    """Return a standardized copy; one-hot and boolean slots pass through."""
    if stats.layout_version != LAYOUT_VERSION:
        raise LayoutMismatchError(
            f"scaler fitted for layout v{stats.layout_version}, code is v{LAYOUT_VERSION}"
        )
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    out = np.array(np.atleast_2d(X), dtype=np.float64, copy=True)
    out[:, :N_SCALARS] = (out[:, :N_SCALARS] - np.asarray(stats.means)) / np.asarray(stats.stds)
    return out[0] if single else out
