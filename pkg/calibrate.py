"""Scratch calibration for experiment hyperparameters (not part of the package)."""

import pickle
import sys
import time

import numpy as np

from qacrank.catalog import generate_catalog
from qacrank.evaluation import evaluate
from qacrank.experiment import ExperimentConfig
from qacrank.features import FeatureLayout
from qacrank.index import build_index
from qacrank.ranker import LinearRanker, NeuralRanker, PopularityRanker
from qacrank.simulate import ClickModelConfig, simulate_qac_sessions, simulate_search_logs
from qacrank.training_data import (
    MixRatio, build_real_instances, estimate_distribution, generate_synthetic, mix_datasets,
)

CACHE = "/tmp/calib_data.pkl"


DEVICE_SHOWN = {"ios_app": 6, "android_app": 6, "desktop_browser": 10, "mobile_browser": 5}


def build_data(seed=1, n_queries=2000, n_search=20000, n_qac=20000, affinity=0.6):
    catalog = generate_catalog(n_queries, 12, 4, 1.0, seed)
    index = build_index(catalog)
    search_logs = simulate_search_logs(
        catalog, n_search, month=None, seed=seed * 1000 + 1, device_affinity=affinity
    )
    cm = ClickModelConfig(0.7, 0.85, rng_seed=seed * 1000 + 2)
    qac_logs = simulate_qac_sessions(
        catalog, PopularityRanker(), index, cm, n_qac, seed * 1000 + 3,
        n_shown=10, retrieval_m=50, device_affinity=affinity,
        n_shown_by_device=DEVICE_SHOWN,
    )
    nq, ns = int(0.8 * len(qac_logs)), int(0.8 * len(search_logs))
    dist = estimate_distribution(qac_logs[:nq], 0.5)
    real = build_real_instances(qac_logs[:nq], index)
    synth = generate_synthetic(search_logs[:ns], dist, index, 50,
                               np.random.default_rng(seed * 1000 + 4))
    return dict(catalog=catalog, qac_te=qac_logs[nq:], se_te=search_logs[ns:],
                dist=dist, real=real, synth=synth, seed=seed)


def main():
    import argparse

    p = argparse.ArgumentParser()
    p.add_argument("--rebuild", action="store_true")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--queries", type=int, default=2000)
    p.add_argument("--logs", type=int, default=20000)
    p.add_argument("--train-events", type=int, default=8000)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--eval-n", type=int, default=4000)
    args = p.parse_args()

    cache = f"{CACHE}.{args.seed}.{args.queries}.{args.logs}"
    try:
        if args.rebuild:
            raise FileNotFoundError
        with open(cache, "rb") as fh:
            data = pickle.load(fh)
        print("loaded cached data")
    except FileNotFoundError:
        t0 = time.time()
        data = build_data(args.seed, args.queries, args.logs, args.logs)
        with open(cache, "wb") as fh:
            pickle.dump(data, fh)
        print(f"built data in {time.time() - t0:.0f}s")

    index = build_index(data["catalog"])
    layout = FeatureLayout.from_records(data["catalog"])
    rng = np.random.default_rng(99)
    n = min(args.train_events, len(data["real"]), len(data["synth"]))
    sub = lambda pool, k: [pool[i] for i in rng.permutation(len(pool))[:k]]
    datasets = {
        "real_only": sub(data["real"], n),
        "synth_only": sub(data["synth"], n),
        "mix_50_50": mix_datasets(sub(data["real"], (n + 1) // 2),
                                  sub(data["synth"], (n + 1) // 2),
                                  MixRatio(0.5), rng),
    }
    qac_te = data["qac_te"][: args.eval_n]
    se_te = data["se_te"][: args.eval_n]
    common = dict(learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
                  l2_weight=args.l2, seed=args.seed)

    pop = PopularityRanker()
    pq = evaluate(pop, index, qac_te, "qac").mrr
    pg = evaluate(pop, index, se_te, "general", m=50, dist=data["dist"], seed=7).mrr
    print(f"{'popularity':12s} qac {pq:.4f}            gen {pg:.4f}")

    t0 = time.time()
    base_kwargs = dict(common, learning_rate=1e-2, epochs=8)
    base = LinearRanker(**base_kwargs).fit(datasets["real_only"], layout)
    bq = evaluate(base, index, qac_te, "qac").mrr
    bg = evaluate(base, index, se_te, "general", m=50, dist=data["dist"], seed=7).mrr
    print(f"{'linear-real':12s} qac {bq:.4f}            gen {bg:.4f}   "
          f"loss {base.loss_trace_[-1]['mean_event_loss']:.4f} [{time.time()-t0:.0f}s]")

    for name, ds in datasets.items():
        t0 = time.time()
        est = NeuralRanker(dropout_rate=args.dropout, **common).fit(ds, layout)
        q = evaluate(est, index, qac_te, "qac").mrr
        g = evaluate(est, index, se_te, "general", m=50, dist=data["dist"], seed=7).mrr
        print(f"{name:12s} qac {q:.4f} ({100*(q-bq)/bq:+.2f}%)  gen {g:.4f} "
              f"({100*(g-bg)/bg:+.2f}%)  loss {est.loss_trace_[-1]['mean_event_loss']:.4f} "
              f"[{time.time()-t0:.0f}s]")


if __name__ == "__main__":
    sys.exit(main())
