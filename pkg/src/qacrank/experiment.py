"""Three-way data-mix experiment: real engagement vs synthetic vs a 50-50 blend.

Per seed: simulate a catalog, search logs, and engagement logs under the
incumbent popularity ordering; build training datasets of equal event counts
for the three strategies; train the neural ranker on each plus the linear
baseline on real data; evaluate every model on held-out engagement replays
and on search-log completions.  Reported deltas are relative percentage
changes against the linear baseline, aggregated as medians across seeds.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .catalog import generate_catalog
from .errors import TrainingDivergedError
from .evaluation import evaluate
from .features import FeatureLayout
from .index import build_index
from .ranker import LinearRanker, NeuralRanker, PopularityRanker, TrainingInstance
from .simulate import ClickModelConfig, simulate_qac_sessions, simulate_search_logs
from .training_data import (
    MixRatio,
    SynthStats,
    build_real_instances,
    estimate_distribution,
    generate_synthetic,
    mix_datasets,
)

log = logging.getLogger("qacrank.experiment")

STRATEGIES = ("real_only", "synth_only", "mix_50_50")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative settings for one experiment run; serializable to JSON."""

    n_queries: int = 10_000
    n_departments: int = 12
    n_verticals: int = 4
    zipf_exponent: float = 1.0
    n_search: int = 150_000
    n_qac: int = 150_000
    n_shown: int = 10
    n_shown_by_device: dict[str, int] | None = field(
        default_factory=lambda: {
            "ios_app": 6,
            "android_app": 6,
            "desktop_browser": 10,
            "mobile_browser": 5,
        }
    )
    retrieval_m: int = 50
    examine_decay: float = 0.7
    accept_if_intended: float = 0.85
    prev_query_prob: float = 0.5
    topic_coherence: float = 0.7
    device_affinity: float = 0.6
    smoothing: float = 0.5
    split: float = 0.8
    train_events: int = 60_000
    eval_qac_events: int = 20_000
    eval_general_events: int = 20_000
    epochs: int = 2
    learning_rate: float = 1e-3
    batch_size: int = 1280
    dropout_rate: float = 0.1
    l2_weight: float = 1e-5
    pairwise_loss: str = "logistic"
    baseline_epochs: int = 8
    baseline_learning_rate: float = 1e-2

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_file(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)


@dataclass
class Cell:
    """One (strategy, seed) outcome."""

    mrr_qac: float = float("nan")
    mrr_general: float = float("nan")
    delta_qac_pct: float = float("nan")
    delta_general_pct: float = float("nan")
    mean_click_position: float = float("nan")
    error: str | None = None


@dataclass
class SeedResult:
    seed: int
    baseline_mrr_qac: float
    baseline_mrr_general: float
    baseline_mean_click_position: float
    cells: dict[str, Cell]
    n_real_pool: int
    n_synth_pool: int
    n_train_events: int
    synth_skip_rate: float
    runtime_seconds: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    seeds: list[int]
    per_seed: list[SeedResult] = field(default_factory=list)

    def median_delta(self, strategy: str, metric: str) -> float:
        values = [getattr(r.cells[strategy], metric) for r in self.per_seed]
        return float(np.nanmedian(values)) if values else float("nan")

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "seeds": self.seeds,
            "per_seed": [
                {
                    "seed": r.seed,
                    "baseline_mrr_qac": r.baseline_mrr_qac,
                    "baseline_mrr_general": r.baseline_mrr_general,
                    "baseline_mean_click_position": r.baseline_mean_click_position,
                    "n_real_pool": r.n_real_pool,
                    "n_synth_pool": r.n_synth_pool,
                    "n_train_events": r.n_train_events,
                    "synth_skip_rate": r.synth_skip_rate,
                    "runtime_seconds": r.runtime_seconds,
                    "cells": {k: vars(c).copy() for k, c in r.cells.items()},
                }
                for r in self.per_seed
            ],
            "median_deltas": {
                s: {
                    "delta_qac_pct": self.median_delta(s, "delta_qac_pct"),
                    "delta_general_pct": self.median_delta(s, "delta_general_pct"),
                }
                for s in STRATEGIES
            },
        }

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def format_table(self) -> str:
        """Aligned summary of median deltas against the linear baseline."""
        labels = {
            "real_only": "real engagement only",
            "synth_only": "synthetic prefixes only",
            "mix_50_50": "50-50 mix",
        }
        lines = [
            f"{'training strategy':<26}{'d_mrr_engagement':>18}{'d_mrr_search':>16}",
            "-" * 60,
        ]
        for s in STRATEGIES:
            dq = self.median_delta(s, "delta_qac_pct")
            dg = self.median_delta(s, "delta_general_pct")
            lines.append(f"{labels[s]:<26}{dq:>+17.2f}%{dg:>+15.2f}%")
        return "\n".join(lines)


def _subsample(pool: list, n: int, rng: np.random.Generator) -> list:
    if len(pool) <= n:
        return list(pool)
    idx = rng.permutation(len(pool))[:n]
    return [pool[i] for i in idx]


def _pct_delta(value: float, base: float) -> float:
    return 100.0 * (value - base) / base if base else float("nan")


def run_seed(config: ExperimentConfig, seed: int) -> SeedResult:
    """Simulate, train, and evaluate all strategies for one seed."""
    t0 = time.time()
    catalog = generate_catalog(
        config.n_queries,
        config.n_departments,
        config.n_verticals,
        config.zipf_exponent,
        seed,
    )
    index = build_index(catalog)
    layout = FeatureLayout.from_records(catalog)

    search_logs = simulate_search_logs(
        catalog,
        config.n_search,
        month=None,
        seed=seed * 1000 + 1,
        topic_coherence=config.topic_coherence,
        device_affinity=config.device_affinity,
    )
    click_model = ClickModelConfig(
        examine_decay=config.examine_decay,
        accept_if_intended=config.accept_if_intended,
        rng_seed=seed * 1000 + 2,
    )
    qac_logs = simulate_qac_sessions(
        catalog,
        PopularityRanker(),
        index,
        click_model,
        config.n_qac,
        seed * 1000 + 3,
        n_shown=config.n_shown,
        retrieval_m=config.retrieval_m,
        prev_query_prob=config.prev_query_prob,
        topic_coherence=config.topic_coherence,
        device_affinity=config.device_affinity,
        n_shown_by_device=config.n_shown_by_device,
    )
    log.info("seed %d: simulated %d search and %d engagement entries in %.1fs",
             seed, len(search_logs), len(qac_logs), time.time() - t0)

    n_qac_train = int(config.split * len(qac_logs))
    n_search_train = int(config.split * len(search_logs))
    qac_train, qac_test = qac_logs[:n_qac_train], qac_logs[n_qac_train:]
    search_train, search_test = search_logs[:n_search_train], search_logs[n_search_train:]

    dist = estimate_distribution(qac_train, config.smoothing)
    real_pool = build_real_instances(qac_train, index)
    synth_stats = SynthStats()
    synth_pool = generate_synthetic(
        search_train,
        dist,
        index,
        config.retrieval_m,
        np.random.default_rng(seed * 1000 + 4),
        stats=synth_stats,
    )
    attempted = len(search_train) - synth_stats.missing_from_catalog
    skip_rate = 1.0 - (len(synth_pool) / attempted) if attempted else 0.0
    log.info("seed %d: %d real / %d synthetic instances (synth skip rate %.1f%%)",
             seed, len(real_pool), len(synth_pool), 100 * skip_rate)

    rng = np.random.default_rng(seed * 1000 + 5)
    n_train = min(config.train_events, len(real_pool), len(synth_pool))
    datasets: dict[str, list[TrainingInstance]] = {
        "real_only": _subsample(real_pool, n_train, rng),
        "synth_only": _subsample(synth_pool, n_train, rng),
        "mix_50_50": mix_datasets(
            _subsample(real_pool, (n_train + 1) // 2, rng),
            _subsample(synth_pool, (n_train + 1) // 2, rng),
            MixRatio(0.5),
            rng,
        ),
    }

    qac_eval = qac_test[: config.eval_qac_events]
    gen_eval = search_test[: config.eval_general_events]
    eval_seed = seed * 1000 + 6

    def train_kwargs() -> dict:
        return dict(
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            epochs=config.epochs,
            l2_weight=config.l2_weight,
            pairwise_loss=config.pairwise_loss,
            seed=seed,
        )

    # the baseline stands in for the mature production ranker: an affine
    # model trained to convergence on the full engagement pool, not capped
    # by the neural models' event budget
    baseline_kwargs = train_kwargs()
    baseline_kwargs["epochs"] = config.baseline_epochs
    baseline_kwargs["learning_rate"] = config.baseline_learning_rate
    baseline = LinearRanker(**baseline_kwargs).fit(real_pool, layout)
    base_qac = evaluate(baseline, index, qac_eval, "qac")
    base_gen = evaluate(baseline, index, gen_eval, "general",
                        m=config.retrieval_m, dist=dist, seed=eval_seed)
    log.info("seed %d: baseline mrr_qac=%.4f mrr_general=%.4f",
             seed, base_qac.mrr, base_gen.mrr)

    cells: dict[str, Cell] = {}
    for strategy in STRATEGIES:
        t1 = time.time()
        try:
            model = NeuralRanker(dropout_rate=config.dropout_rate, **train_kwargs()).fit(
                datasets[strategy], layout
            )
        except TrainingDivergedError as exc:
            log.warning("seed %d: %s diverged: %s", seed, strategy, exc)
            cells[strategy] = Cell(error=str(exc))
            continue
        rep_qac = evaluate(model, index, qac_eval, "qac")
        rep_gen = evaluate(model, index, gen_eval, "general",
                           m=config.retrieval_m, dist=dist, seed=eval_seed)
        cells[strategy] = Cell(
            mrr_qac=rep_qac.mrr,
            mrr_general=rep_gen.mrr,
            delta_qac_pct=_pct_delta(rep_qac.mrr, base_qac.mrr),
            delta_general_pct=_pct_delta(rep_gen.mrr, base_gen.mrr),
            mean_click_position=rep_qac.mean_click_position,
        )
        log.info(
            "seed %d: %s mrr_qac=%.4f (%+.2f%%) mrr_general=%.4f (%+.2f%%) [%.0fs]",
            seed, strategy, rep_qac.mrr, cells[strategy].delta_qac_pct,
            rep_gen.mrr, cells[strategy].delta_general_pct, time.time() - t1,
        )

    return SeedResult(
        seed=seed,
        baseline_mrr_qac=base_qac.mrr,
        baseline_mrr_general=base_gen.mrr,
        baseline_mean_click_position=base_qac.mean_click_position,
        cells=cells,
        n_real_pool=len(real_pool),
        n_synth_pool=len(synth_pool),
        n_train_events=n_train,
        synth_skip_rate=skip_rate,
        runtime_seconds=time.time() - t0,
    )


def run_mix_experiment(
    config: ExperimentConfig,
    seeds: list[int],
) -> ExperimentReport:
    """Run every seed and aggregate median deltas across them."""
    report = ExperimentReport(config=config, seeds=list(seeds))
    for seed in seeds:
        report.per_seed.append(run_seed(config, seed))
    return report
