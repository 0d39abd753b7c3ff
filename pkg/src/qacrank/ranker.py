"""Shallow feed-forward ranking model trained with a pairwise approximation of a listwise loss.

Each training event carries one positive suggestion and the unclicked
candidates as negatives, so the listwise objective collapses to exactly
``n - 1`` positive-vs-negative pairwise terms per event, keeping the cost of
an event linear in its list length.  The scorer is a fully connected network
with sigmoid hidden layers (256/128/64 by default) and an affine scalar
output; a zero-hidden-layer configuration doubles as the linear baseline.

The numerics are plain numpy: explicit forward/backward passes, Adam
updates, inverted dropout between hidden layers, and L2 decay on weight
matrices (never biases).  Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import hashlib
import os
import pickle
from dataclasses import dataclass, replace
from typing import Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .catalog import QueryRecord
from .errors import ConfigurationError, DatasetError, TrainingDivergedError
from .features import (
    DEVICE_TYPES,
    LAYOUT_VERSION,
    N_BOOLS,
    N_SCALARS,
    ContextSignals,
    FeatureExtractor,
    FeatureLayout,
    ScalerStats,
    apply_scaler,
    token_count,
)
from .index import Candidate

MODEL_MAGIC = b"QACMDL1"
DEFAULT_HIDDEN = (256, 128, 64)
_DEVICE_SLOT = {d: i for i, d in enumerate(DEVICE_TYPES)}


def sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and regularization settings for one training run."""

    batch_size: int = 1280
    learning_rate: float = 1e-3
    epochs: int = 3
    dropout_rate: float = 0.1
    l2_weight: float = 1e-5
    pairwise_loss: str = "logistic"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigurationError("batch_size must be >= 1 and epochs >= 0")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError("dropout_rate must be in [0, 1)")
        if self.l2_weight < 0:
            raise ConfigurationError("l2_weight must be >= 0")
        if self.pairwise_loss not in ("logistic", "hinge"):
            raise ConfigurationError(f"unknown pairwise_loss {self.pairwise_loss!r}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1 and self.adam_epsilon > 0):
            raise ConfigurationError("invalid Adam parameters")


@dataclass
class RankerModel:
    """Scoring function parameters plus the feature scaler they were fitted with."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scaler: ScalerStats | None = None
    layout: FeatureLayout | None = None
    train_config: TrainConfig | None = None

    @property
    def feature_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def fingerprint(self) -> str:
        """Short content digest; used as the served model version."""
        h = hashlib.sha256()
        h.update(repr(self.layer_sizes).encode())
        for w, b in zip(self.weights, self.biases):
            h.update(w.tobytes())
            h.update(b.tobytes())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class TrainingInstance:
    """One ranking event: a prefix, its context, one positive, and the negatives."""

    prefix: str
    context: ContextSignals
    positive: Candidate
    negatives: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        if any(n.query.text == self.positive.query.text for n in self.negatives):
            raise DatasetError(
                f"positive {self.positive.query.text!r} also appears in its negatives"
            )


def init_model(
    feature_dim: int,
    seed: int = 0,
    hidden_sizes: Sequence[int] = DEFAULT_HIDDEN,
) -> RankerModel:
    """Glorot-uniform weights (unit gain suits sigmoid saturation), zero biases."""
    if feature_dim < 1:
        raise ConfigurationError(f"feature_dim must be >= 1, got {feature_dim}")
    rng = np.random.default_rng(seed)
    sizes = (feature_dim, *hidden_sizes, 1)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return RankerModel(layer_sizes=sizes, weights=weights, biases=biases)


def _forward(model: RankerModel, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Scores plus per-layer inputs (needed by backprop). No dropout."""
    acts = [X]
    h = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        h = sigmoid(h @ W + b)
        acts.append(h)
    scores = (h @ model.weights[-1] + model.biases[-1]).ravel()
    return scores, acts


def score_matrix(model: RankerModel, X: np.ndarray) -> np.ndarray:
    """Scores for pre-scaled feature rows; inference only, model untouched."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise ValueError(f"expected rows of width {model.feature_dim}, got {X.shape}")
    return _forward(model, X)[0]


def score(model: RankerModel, v: np.ndarray) -> float:
    """Score one pre-scaled feature vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != model.feature_dim:
        raise ValueError(f"expected a vector of length {model.feature_dim}, got {v.shape}")
    s = float(_forward(model, v[None, :])[0][0])
    if not np.isfinite(s):
        raise ValueError("model produced a non-finite score")
    return s


def score_candidates(
    model: RankerModel,
    candidates: Sequence[Candidate],
    context: ContextSignals,
) -> list[tuple[Candidate, float]]:
    """Rank candidates for one event: descending score, retrieval order on ties."""
    if not candidates:
        raise DatasetError("score_candidates needs at least one candidate")
    if model.layout is None:
        raise ConfigurationError("model has no feature layout attached")
    X = FeatureExtractor(model.layout).extract_matrix(list(candidates), context)
    if model.scaler is not None:
        X = apply_scaler(model.scaler, X)
    s = score_matrix(model, X)
    order = np.argsort(-s, kind="stable")
    return [(candidates[int(i)], float(s[int(i)])) for i in order]


def _pairwise_from_scores(
    s: np.ndarray, ptr: np.ndarray, kind: str
) -> tuple[float, np.ndarray, int]:
    """Loss, d(loss)/d(score), and pair count for contiguous events.

    ``ptr`` delimits events; row ``ptr[e]`` is the positive of event ``e`` and
    the rows up to ``ptr[e+1]`` are its negatives.
    """
    sizes = np.diff(ptr)
    n_rows = int(ptr[-1])
    neg_mask = np.ones(n_rows, dtype=bool)
    neg_mask[ptr[:-1]] = False
    pos_of_row = np.repeat(ptr[:-1], sizes)

    d = s[pos_of_row[neg_mask]] - s[neg_mask]
    if kind == "logistic":
        losses = np.logaddexp(0.0, -d)
        g = sigmoid(-d)  # = -dl/dd
    elif kind == "hinge":
        losses = np.maximum(0.0, 1.0 - d)
        g = (d < 1.0).astype(np.float64)
    else:
        raise ConfigurationError(f"unknown pairwise loss {kind!r}")

    dscore = np.zeros(n_rows, dtype=np.float64)
    dscore[neg_mask] = g
    # per-event sums of g flow to the positives with opposite sign
    neg_counts = sizes - 1
    cum = np.concatenate(([0.0], np.cumsum(g)))
    bounds = np.cumsum(np.concatenate(([0], neg_counts)))
    dscore[ptr[:-1]] = -(cum[bounds[1:]] - cum[bounds[:-1]])
    return float(losses.sum()), dscore, int(len(d))


def _backward(
    weights: list[np.ndarray],
    inputs: list[np.ndarray],
    activations: list[np.ndarray],
    dscore: np.ndarray,
    dropout_masks: list[np.ndarray] | None = None,
    keep: float = 1.0,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagate d(loss)/d(score) to all weights and biases.

    ``inputs[l]`` is what layer ``l`` consumed (post-dropout during
    training); ``activations[l]`` is hidden layer ``l``'s sigmoid output
    before dropout, which supplies the derivative.
    """
    n_layers = len(weights)
    dWs: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    dbs: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]

    g = dscore[:, None]
    dWs[-1] = inputs[-1].T @ g
    dbs[-1] = g.sum(axis=0)
    gh = g @ weights[-1].T

    for l in range(n_layers - 2, -1, -1):
        a = activations[l]
        gz = gh  # fresh array per layer, safe to mutate in place
        if dropout_masks is not None:
            gz *= dropout_masks[l]
            gz *= 1.0 / keep
        gz *= a
        gz *= 1.0 - a
        dWs[l] = inputs[l].T @ gz
        dbs[l] = gz.sum(axis=0)
        if l > 0:
            gh = gz @ weights[l].T
    return dWs, dbs


def instance_features(model: RankerModel, instance: TrainingInstance) -> np.ndarray:
    """Scaled feature rows for one event: positive first, then negatives."""
    if model.layout is None:
        raise ConfigurationError("model has no feature layout attached")
    rows = [instance.positive, *instance.negatives]
    X = FeatureExtractor(model.layout).extract_matrix(rows, instance.context)
    if model.scaler is not None:
        X = apply_scaler(model.scaler, X)
    return X


def event_loss(
    model: RankerModel,
    instance: TrainingInstance,
    loss_kind: str = "logistic",
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]], int]:
    """Loss, parameter gradients, and pair count for a single event.

    The pair count is exactly ``len(negatives)``; an event without negatives
    contributes zero loss and zero gradient so callers can count the skip.
    """
    if not instance.negatives:
        zeros_w = [np.zeros_like(w) for w in model.weights]
        zeros_b = [np.zeros_like(b) for b in model.biases]
        return 0.0, (zeros_w, zeros_b), 0

    X = instance_features(model, instance)
    s, acts = _forward(model, X)
    ptr = np.array([0, len(s)], dtype=np.int64)
    loss, dscore, n_pairs = _pairwise_from_scores(s, ptr, loss_kind)
    dWs, dbs = _backward(model.weights, acts, acts[1:], dscore)
    return loss, (dWs, dbs), n_pairs


class _CompiledDataset:
    """Instances flattened to index arrays so batches assemble with numpy gathers."""

    def __init__(self, instances: Sequence[TrainingInstance], layout: FeatureLayout):
        self.layout = layout
        self.skipped_events = 0

        text_to_slot: dict[str, int] = {}
        records: list[QueryRecord] = []

        qidx: list[int] = []
        exact: list[bool] = []
        ptr: list[int] = [0]
        ev_prefix_len: list[float] = []
        ev_prefix_tokens: list[float] = []
        ev_month: list[int] = []
        ev_prev_dept: list[int] = []
        ev_prev_vert: list[int] = []
        ev_device: list[int] = []

        for inst in instances:
            if not inst.negatives:
                self.skipped_events += 1
                continue
            ctx = inst.context
            for cand in (inst.positive, *inst.negatives):
                slot = text_to_slot.get(cand.query.text)
                if slot is None:
                    slot = len(records)
                    text_to_slot[cand.query.text] = slot
                    records.append(cand.query)
                qidx.append(slot)
                exact.append(cand.is_exact_match)
            ptr.append(len(qidx))
            ev_prefix_len.append(float(len(ctx.prefix_text)))
            ev_prefix_tokens.append(float(token_count(ctx.prefix_text)))
            ev_month.append(ctx.month - 1)
            ev_prev_dept.append(-1 if ctx.previous_query_department is None
                                else ctx.previous_query_department)
            ev_prev_vert.append(-1 if ctx.previous_query_vertical is None
                                else ctx.previous_query_vertical)
            ev_device.append(_DEVICE_SLOT[ctx.device_type])

        if not ptr[-1]:
            raise DatasetError("no trainable events (every instance lacked negatives)")

        self.qidx = np.asarray(qidx, dtype=np.int32)
        self.exact = np.asarray(exact, dtype=np.float64)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.n_events = len(self.ptr) - 1
        self.ev_prefix_len = np.asarray(ev_prefix_len)
        self.ev_prefix_tokens = np.asarray(ev_prefix_tokens)
        self.ev_month = np.asarray(ev_month, dtype=np.int32)
        self.ev_prev_dept = np.asarray(ev_prev_dept, dtype=np.int32)
        self.ev_prev_vert = np.asarray(ev_prev_vert, dtype=np.int32)
        self.ev_device = np.asarray(ev_device, dtype=np.int32)

        n_q = len(records)
        F = layout.n_features
        self.q_static = np.zeros((n_q, F), dtype=np.float64)
        self.q_boosts = np.empty((n_q, 12), dtype=np.float64)
        self.q_dept = np.empty(n_q, dtype=np.int32)
        self.q_vert = np.empty(n_q, dtype=np.int32)
        dept_base = N_SCALARS + N_BOOLS
        vert_base = dept_base + layout.n_departments
        for i, rec in enumerate(records):
            self.q_static[i, 0] = np.log(rec.popularity)
            self.q_static[i, 2] = float(len(rec.text))
            self.q_static[i, 3] = float(token_count(rec.text))
            self.q_static[i, dept_base + rec.department] = 1.0
            self.q_static[i, vert_base + rec.vertical] = 1.0
            self.q_boosts[i] = np.log(rec.seasonal_boost)
            self.q_dept[i] = rec.department
            self.q_vert[i] = rec.vertical
        self._device_base = vert_base + layout.n_verticals

    def batch(self, event_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Raw feature rows and the local event pointer for the given events."""
        starts = self.ptr[event_ids]
        stops = self.ptr[event_ids + 1]
        sizes = stops - starts
        rows = np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)])
        local_ptr = np.concatenate(([0], np.cumsum(sizes)))

        q = self.qidx[rows]
        X = self.q_static[q].copy()
        row_event = np.repeat(np.arange(len(event_ids)), sizes)
        ev = event_ids[row_event]
        X[:, 1] = self.q_boosts[q, self.ev_month[ev]]
        X[:, 4] = self.ev_prefix_len[ev]
        X[:, 5] = self.ev_prefix_tokens[ev]
        X[:, 6] = self.exact[rows]
        X[:, 7] = (self.q_dept[q] == self.ev_prev_dept[ev]) & (self.ev_prev_dept[ev] >= 0)
        X[:, 8] = (self.q_vert[q] == self.ev_prev_vert[ev]) & (self.ev_prev_vert[ev] >= 0)
        X[np.arange(len(rows)), self._device_base + self.ev_device[ev]] = 1.0
        return X, local_ptr

    def fit_scaler(self) -> ScalerStats:
        """Population mean/std of the scalar block, streamed over all events."""
        n = 0
        acc = np.zeros(N_SCALARS)
        acc2 = np.zeros(N_SCALARS)
        all_events = np.arange(self.n_events)
        for chunk in np.array_split(all_events, max(1, self.n_events // 4096)):
            X, _ = self.batch(chunk)
            acc += X[:, :N_SCALARS].sum(axis=0)
            acc2 += (X[:, :N_SCALARS] ** 2).sum(axis=0)
            n += X.shape[0]
        means = acc / n
        var = np.maximum(acc2 / n - means**2, 0.0)
        stds = np.sqrt(var)
        stds = np.where(stds > 1e-12, stds, 1.0)
        return ScalerStats(means=tuple(means), stds=tuple(stds), layout_version=LAYOUT_VERSION)


def _train_compiled(
    model: RankerModel,
    compiled: _CompiledDataset,
    config: TrainConfig,
) -> tuple[RankerModel, list[dict]]:
    model = replace(
        model,
        weights=[w.copy() for w in model.weights],
        biases=[b.copy() for b in model.biases],
        train_config=config,
    )
    rng = np.random.default_rng(config.seed)
    adam_m = [np.zeros_like(p) for p in (*model.weights, *model.biases)]
    adam_v = [np.zeros_like(p) for p in (*model.weights, *model.biases)]
    t = 0
    keep = 1.0 - config.dropout_rate
    n_hidden = len(model.weights) - 1
    trace: list[dict] = []

    dropout = config.dropout_rate > 0.0
    for epoch in range(config.epochs):
        order = rng.permutation(compiled.n_events)
        epoch_loss = 0.0
        for start in range(0, compiled.n_events, config.batch_size):
            batch_events = order[start : start + config.batch_size]
            X, ptr = compiled.batch(batch_events)
            if model.scaler is not None:
                X = apply_scaler(model.scaler, X)

            # batch compute runs in float32 against float64 master parameters
            w32 = [w.astype(np.float32) for w in model.weights]
            b32 = [b.astype(np.float32) for b in model.biases]
            inputs = [X.astype(np.float32)]
            pre_acts: list[np.ndarray] = []
            masks: list[np.ndarray] = []
            h = inputs[0]
            for W, b in zip(w32[:-1], b32[:-1]):
                a = sigmoid(h @ W + b)
                pre_acts.append(a)
                if dropout:
                    mask = rng.random(a.shape, dtype=np.float32) < keep
                    h = a * mask
                    h *= np.float32(1.0 / keep)
                    masks.append(mask)
                else:
                    h = a
                inputs.append(h)
            s = (h @ w32[-1] + b32[-1]).ravel().astype(np.float64)

            # non-finite values surface as an explicit divergence error below
            with np.errstate(invalid="ignore", over="ignore"):
                batch_loss, dscore, _ = _pairwise_from_scores(s, ptr, config.pairwise_loss)
            n_batch = len(batch_events)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} batch {start // config.batch_size}"
                )
            epoch_loss += batch_loss

            dWs, dbs = _backward(
                w32, inputs, pre_acts, (dscore / n_batch).astype(np.float32),
                dropout_masks=masks if n_hidden and dropout else None,
                keep=keep,
            )
            if config.l2_weight > 0.0:
                for l in range(len(dWs)):
                    dWs[l] = dWs[l] + config.l2_weight * model.weights[l]

            t += 1
            params = (*model.weights, *model.biases)
            grads = (*dWs, *dbs)
            b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_epsilon
            corr1 = 1.0 - b1**t
            corr2 = 1.0 - b2**t
            for p, g, m, v in zip(params, grads, adam_m, adam_v):
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                p -= config.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + eps)

        penalty = 0.0
        if config.l2_weight > 0.0:
            penalty = 0.5 * config.l2_weight * float(sum((w**2).sum() for w in model.weights))
        trace.append(
            {
                "epoch": epoch,
                "mean_event_loss": epoch_loss / compiled.n_events,
                "l2_penalty": penalty,
                "skipped_events": compiled.skipped_events,
            }
        )
    return model, trace


def train(
    model: RankerModel,
    dataset: Sequence[TrainingInstance],
    config: TrainConfig,
) -> tuple[RankerModel, list[dict]]:
    """Train a copy of ``model`` on the dataset; returns (model, per-epoch trace)."""
    if not dataset:
        raise DatasetError("training dataset is empty")
    if model.layout is None:
        raise ConfigurationError("model has no feature layout attached")
    compiled = _CompiledDataset(dataset, model.layout)
    return _train_compiled(model, compiled, config)


def train_linear_baseline(
    dataset: Sequence[TrainingInstance],
    config: TrainConfig,
    layout: FeatureLayout | None = None,
    scaler: ScalerStats | None = None,
) -> tuple[RankerModel, list[dict]]:
    """Train the affine baseline (no hidden layers) with the same loss and optimizer."""
    if not dataset:
        raise DatasetError("training dataset is empty")
    if layout is None:
        layout = _layout_from_instances(dataset)
    compiled = _CompiledDataset(dataset, layout)
    if scaler is None:
        scaler = compiled.fit_scaler()
    model = init_model(layout.n_features, seed=config.seed, hidden_sizes=())
    model.layout = layout
    model.scaler = scaler
    return _train_compiled(model, compiled, config)


def _layout_from_instances(dataset: Sequence[TrainingInstance]) -> FeatureLayout:
    records = [inst.positive.query for inst in dataset]
    records += [n.query for inst in dataset for n in inst.negatives]
    return FeatureLayout.from_records(records)


def pairwise_accuracy(model: RankerModel, dataset: Sequence[TrainingInstance]) -> float:
    """Fraction of (positive, negative) pairs scored in the right order; ties count half."""
    wins = 0.0
    total = 0
    for inst in dataset:
        if not inst.negatives:
            continue
        X = instance_features(model, inst)
        s = score_matrix(model, X)
        d = s[0] - s[1:]
        wins += float((d > 0).sum()) + 0.5 * float((d == 0).sum())
        total += len(d)
    if total == 0:
        raise DatasetError("no pairs to evaluate")
    return wins / total


class SuggestionRanker(Protocol):
    """Anything that can order candidates for a context."""

    def score_candidates(
        self, candidates: Sequence[Candidate], context: ContextSignals
    ) -> list[tuple[Candidate, float]]: ...


class PopularityRanker:
    """Orders candidates exactly as retrieval does (exact first, then popularity).

    Stands in for the incumbent production ordering when simulating
    engagement logs or comparing against a no-model baseline.
    """

    preserves_retrieval_order = True

    def score_candidates(
        self, candidates: Sequence[Candidate], context: ContextSignals
    ) -> list[tuple[Candidate, float]]:
        return [
            (c, (10.0 if c.is_exact_match else 0.0) + c.retrieval_score) for c in candidates
        ]


class NeuralRanker(BaseEstimator):
    """Estimator wrapper: ``fit`` on training instances, then rank candidate lists.

    Hyperparameters follow the estimator convention (stored verbatim,
    introspectable via ``get_params``); the fitted network lands in
    ``model_`` and the per-epoch loss trace in ``loss_trace_``.
    """

    preserves_retrieval_order = False

    def __init__(
        self,
        hidden_layers: tuple[int, ...] = DEFAULT_HIDDEN,
        learning_rate: float = 1e-3,
        batch_size: int = 1280,
        epochs: int = 3,
        dropout_rate: float = 0.1,
        l2_weight: float = 1e-5,
        pairwise_loss: str = "logistic",
        adam_beta1: float = 0.9,
        adam_beta2: float = 0.999,
        adam_epsilon: float = 1e-8,
        seed: int = 0,
    ):
        self.hidden_layers = hidden_layers
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.dropout_rate = dropout_rate
        self.l2_weight = l2_weight
        self.pairwise_loss = pairwise_loss
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_epsilon = adam_epsilon
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            dropout_rate=self.dropout_rate,
            l2_weight=self.l2_weight,
            pairwise_loss=self.pairwise_loss,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_epsilon=self.adam_epsilon,
            seed=self.seed,
        )

    def fit(
        self,
        instances: Sequence[TrainingInstance],
        layout: FeatureLayout | None = None,
    ) -> "NeuralRanker":
        if not instances:
            raise DatasetError("cannot fit on an empty dataset")
        if layout is None:
            layout = _layout_from_instances(instances)
        compiled = _CompiledDataset(instances, layout)
        scaler = compiled.fit_scaler()
        model = init_model(layout.n_features, seed=self.seed, hidden_sizes=self.hidden_layers)
        model.layout = layout
        model.scaler = scaler
        self.model_, self.loss_trace_ = _train_compiled(model, compiled, self._config())
        return self

    def _model(self) -> RankerModel:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError("this ranker is not fitted yet")
        return model

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Scores for raw (unscaled) feature rows."""
        model = self._model()
        X = np.asarray(X, dtype=np.float64)
        if model.scaler is not None:
            X = apply_scaler(model.scaler, np.atleast_2d(X))
        return score_matrix(model, np.atleast_2d(X))

    def score_candidates(
        self, candidates: Sequence[Candidate], context: ContextSignals
    ) -> list[tuple[Candidate, float]]:
        return score_candidates(self._model(), candidates, context)

    def save(self, path: str | os.PathLike) -> None:
        save_model(path, self._model())

    @classmethod
    def from_model(cls, model: RankerModel) -> "NeuralRanker":
        cfg = model.train_config or TrainConfig()
        est = cls(
            hidden_layers=tuple(model.layer_sizes[1:-1]),
            learning_rate=cfg.learning_rate,
            batch_size=cfg.batch_size,
            epochs=cfg.epochs,
            dropout_rate=cfg.dropout_rate,
            l2_weight=cfg.l2_weight,
            pairwise_loss=cfg.pairwise_loss,
            adam_beta1=cfg.adam_beta1,
            adam_beta2=cfg.adam_beta2,
            adam_epsilon=cfg.adam_epsilon,
            seed=cfg.seed,
        )
        est.model_ = model
        est.loss_trace_ = []
        return est

    @classmethod
    def load(cls, path: str | os.PathLike) -> "NeuralRanker":
        return cls.from_model(load_model(path))


class LinearRanker(NeuralRanker):
    """Affine scoring baseline: the same pipeline with zero hidden layers."""

    def __init__(
        self,
        learning_rate: float = 1e-3,
        batch_size: int = 1280,
        epochs: int = 3,
        l2_weight: float = 1e-5,
        pairwise_loss: str = "logistic",
        adam_beta1: float = 0.9,
        adam_beta2: float = 0.999,
        adam_epsilon: float = 1e-8,
        seed: int = 0,
    ):
        super().__init__(
            hidden_layers=(),
            learning_rate=learning_rate,
            batch_size=batch_size,
            epochs=epochs,
            dropout_rate=0.0,
            l2_weight=l2_weight,
            pairwise_loss=pairwise_loss,
            adam_beta1=adam_beta1,
            adam_beta2=adam_beta2,
            adam_epsilon=adam_epsilon,
            seed=seed,
        )


def save_model(path: str | os.PathLike, model: RankerModel) -> None:
    """Versioned binary container: magic header + parameters + scaler + layout."""
    payload = {
        "format_version": 1,
        "layer_sizes": tuple(model.layer_sizes),
        "weights": [np.asarray(w, dtype=np.float64) for w in model.weights],
        "biases": [np.asarray(b, dtype=np.float64) for b in model.biases],
        "scaler": None
        if model.scaler is None
        else {
            "means": model.scaler.means,
            "stds": model.scaler.stds,
            "layout_version": model.scaler.layout_version,
        },
        "layout": None
        if model.layout is None
        else {
            "n_departments": model.layout.n_departments,
            "n_verticals": model.layout.n_verticals,
            "version": model.layout.version,
        },
        "train_config": None if model.train_config is None else vars(model.train_config).copy(),
    }
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(pickle.dumps(payload, protocol=4))


def load_model(path: str | os.PathLike) -> RankerModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise DatasetError(f"{os.fspath(path)}: not a model file (bad magic {magic!r})")
        payload = pickle.loads(fh.read())
    scaler = None
    if payload["scaler"] is not None:
        scaler = ScalerStats(
            means=tuple(payload["scaler"]["means"]),
            stds=tuple(payload["scaler"]["stds"]),
            layout_version=payload["scaler"]["layout_version"],
        )
    layout = None
    if payload["layout"] is not None:
        layout = FeatureLayout(
            n_departments=payload["layout"]["n_departments"],
            n_verticals=payload["layout"]["n_verticals"],
            version=payload["layout"]["version"],
        )
    cfg = None
    if payload["train_config"] is not None:
        cfg = TrainConfig(**payload["train_config"])
    return RankerModel(
        layer_sizes=tuple(payload["layer_sizes"]),
        weights=[np.asarray(w) for w in payload["weights"]],
        biases=[np.asarray(b) for b in payload["biases"]],
        scaler=scaler,
        layout=layout,
        train_config=cfg,
    )
