"""Command-line pipeline: generate data, build artifacts, train, evaluate, serve.

Every subcommand reads and writes the documented file formats, takes a
``--seed`` where randomness is involved, and exits non-zero with a
diagnostic naming the offending path on failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .catalog import generate_catalog, load_catalog, save_catalog
from .errors import QacError
from .evaluation import evaluate, save_report
from .experiment import ExperimentConfig, run_mix_experiment
from .features import FeatureLayout
from .index import PrefixIndex, build_index, load_index, save_index
from .ranker import (
    LinearRanker,
    NeuralRanker,
    PopularityRanker,
    load_model,
)
from .service import SuggestService, bench_latency, create_app
from .simulate import (
    ClickModelConfig,
    load_engagement_logs,
    load_search_logs,
    save_engagement_logs,
    save_search_logs,
    simulate_qac_sessions,
    simulate_search_logs,
)
from .training_data import (
    MixRatio,
    RealStats,
    SynthStats,
    build_real_instances,
    estimate_distribution,
    generate_synthetic,
    load_distribution,
    load_instances,
    mix_datasets,
    save_distribution,
    save_instances,
)


def _add_index_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--catalog", help="catalog file (index is built in memory)")
    group.add_argument("--index", help="serialized index file")


def _resolve_index(args: argparse.Namespace) -> PrefixIndex:
    if getattr(args, "index", None):
        return load_index(args.index)
    return build_index(load_catalog(args.catalog))


def _cmd_gen_catalog(args: argparse.Namespace) -> int:
    records = generate_catalog(
        args.n, args.departments, args.verticals, args.zipf, args.seed
    )
    n = save_catalog(args.out, records)
    print(f"wrote {n} catalog records to {args.out}")
    return 0


def _cmd_build_index(args: argparse.Namespace) -> int:
    index = build_index(load_catalog(args.catalog))
    save_index(args.out, index)
    print(f"indexed {len(index)} queries into {args.out}")
    return 0


def _cmd_simulate_search(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    month = None if args.month == 0 else args.month
    entries = simulate_search_logs(catalog, args.n, month, args.seed)
    n = save_search_logs(args.out, entries)
    print(f"wrote {n} search log entries to {args.out}")
    return 0


def _cmd_simulate_qac(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    index = build_index(catalog)
    click_model = ClickModelConfig(
        examine_decay=args.decay, accept_if_intended=args.accept, rng_seed=args.seed + 1
    )
    entries = simulate_qac_sessions(
        catalog,
        PopularityRanker(),
        index,
        click_model,
        args.n,
        args.seed,
        n_shown=args.n_shown,
        retrieval_m=args.m,
    )
    n = save_engagement_logs(args.out, entries)
    print(f"wrote {n} engagement entries to {args.out}")
    return 0


def _cmd_estimate_dist(args: argparse.Namespace) -> int:
    engagement = load_engagement_logs(args.engagement)
    dist = estimate_distribution(engagement, args.smoothing)
    save_distribution(args.out, dist)
    print(f"fitted prefix-length distribution over {len(dist.observed_lengths())} "
          f"query lengths into {args.out}")
    return 0


def _cmd_gen_synth(args: argparse.Namespace) -> int:
    index = _resolve_index(args)
    logs = load_search_logs(args.search_logs)
    dist = load_distribution(args.dist)
    stats = SynthStats()
    instances = generate_synthetic(
        logs, dist, index, args.m, np.random.default_rng(args.seed), stats=stats
    )
    n = save_instances(args.out, instances)
    print(
        f"wrote {n} synthetic instances to {args.out} "
        f"(skipped: {stats.positive_not_retrieved} unretrieved, "
        f"{stats.no_negatives} without negatives, "
        f"{stats.missing_from_catalog} missing from catalog)"
    )
    return 0


def _cmd_build_real(args: argparse.Namespace) -> int:
    index = _resolve_index(args)
    engagement = load_engagement_logs(args.engagement)
    stats = RealStats()
    instances = build_real_instances(engagement, index, stats=stats)
    n = save_instances(args.out, instances)
    print(f"wrote {n} real instances to {args.out} "
          f"(skipped {stats.no_negatives} without negatives)")
    return 0


def _cmd_mix(args: argparse.Namespace) -> int:
    index = _resolve_index(args)
    real = load_instances(args.real, index)
    synthetic = load_instances(args.synthetic, index)
    mixed = mix_datasets(
        real, synthetic, MixRatio(args.ratio), np.random.default_rng(args.seed)
    )
    n = save_instances(args.out, mixed)
    print(f"wrote {n} mixed instances to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    index = _resolve_index(args)
    instances = load_instances(args.data, index)
    layout = FeatureLayout.from_records(index.records)
    common = dict(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        l2_weight=args.l2,
        pairwise_loss=args.loss,
        seed=args.seed,
    )
    if args.linear:
        est: NeuralRanker = LinearRanker(**common)
    else:
        est = NeuralRanker(dropout_rate=args.dropout, **common)
    est.fit(instances, layout)
    est.save(args.out)
    final = est.loss_trace_[-1]["mean_event_loss"] if est.loss_trace_ else float("nan")
    print(f"trained on {len(instances)} events "
          f"(final mean event loss {final:.4f}); model saved to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    index = _resolve_index(args)
    model = load_model(args.model)
    ranker = NeuralRanker.from_model(model)
    if args.mode == "qac":
        events = load_engagement_logs(args.events)
        report = evaluate(ranker, index, events, "qac")
    else:
        if not args.dist:
            raise QacError("--dist is required for general mode")
        events = load_search_logs(args.events)
        dist = load_distribution(args.dist)
        report = evaluate(ranker, index, events, "general", m=args.m, dist=dist, seed=args.seed)
    if args.out:
        save_report(args.out, report)
    print(f"mode={report.mode} mrr={report.mrr:.4f} events={report.n_events} "
          f"target_missing={report.n_target_missing} "
          f"mean_click_position={report.mean_click_position:.3f}")
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise QacError("--seeds must name at least one seed")
    report = run_mix_experiment(config, seeds)
    if args.out:
        report.save(args.out)
        print(f"report written to {args.out}")
    print(report.format_table())
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    service = SuggestService.from_files(args.index, args.model)
    app = create_app(service)
    port = int(os.environ.get("QACRANK_PORT", args.port))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    service = SuggestService.from_files(args.index, args.model)
    summary = bench_latency(service, args.n, concurrency=args.concurrency, seed=args.seed)
    print(json.dumps(summary.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qacrank", description="query autocomplete ranking pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-catalog", help="generate a synthetic query catalog")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--departments", type=int, default=12)
    p.add_argument("--verticals", type=int, default=4)
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_catalog)

    p = sub.add_parser("build-index", help="build and serialize the prefix index")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_index)

    p = sub.add_parser("simulate-search", help="simulate search logs (no autocomplete)")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--month", type=int, default=0, help="1..12, or 0 for a mix of months")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate_search)

    p = sub.add_parser("simulate-qac", help="simulate position-biased engagement logs")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--decay", type=float, default=0.7)
    p.add_argument("--accept", type=float, default=0.85)
    p.add_argument("--n-shown", type=int, default=10)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate_qac)

    p = sub.add_parser("estimate-dist", help="fit the prefix-length distribution")
    p.add_argument("--engagement", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--smoothing", type=float, default=0.5)
    p.set_defaults(func=_cmd_estimate_dist)

    p = sub.add_parser("gen-synth", help="generate synthetic training instances")
    _add_index_args(p)
    p.add_argument("--search-logs", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("build-real", help="turn engagement logs into training instances")
    _add_index_args(p)
    p.add_argument("--engagement", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_real)

    p = sub.add_parser("mix", help="blend real and synthetic instance files")
    _add_index_args(p)
    p.add_argument("--real", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--ratio", type=float, default=0.5, help="fraction of real instances")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("train", help="train the neural ranker (or linear baseline)")
    _add_index_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--linear", action="store_true")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=1280)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--loss", choices=("logistic", "hinge"), default="logistic")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on engagement or search events")
    _add_index_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--mode", choices=("qac", "general"), required=True)
    p.add_argument("--dist", help="prefix-length distribution (general mode)")
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="run the three-way data-mix experiment")
    p.add_argument("--config", help="JSON config file (defaults used when omitted)")
    p.add_argument("--seeds", default="1,2,3", help="comma-separated seeds")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("serve", help="run the HTTP suggestion service")
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("bench", help="measure suggest latency and throughput")
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (QacError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
