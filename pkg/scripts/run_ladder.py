#!/usr/bin/env python3
"""Run the experiment ladder on a synthetic dataset and write one report per rung.

Rungs: univariate, known orders, feature search, cross-warehouse pretraining
and the parallel multi-product model. Benchmarks (ETS, MPQ, MDPQ and
optionally LR/RF) are evaluated on the same test origins.

    python scripts/run_ladder.py --out runs/ladder --products 6 --warehouses 2
"""
from __future__ import annotations

import argparse
import logging
import time
import warnings
from pathlib import Path

import numpy as np

from lstm_demand.evaluation import EvaluationReport, plot_report, write_evaluation_csv, write_summary_csv
from lstm_demand.experiments import (
    PretrainFallbackWarning,
    run_feature_search,
    run_known_orders,
    run_parallel,
    run_pretrain,
    run_univariate,
)
from lstm_demand.forecasting import FEATURE_SETS, baseline_forecast, series_from_dataset
from lstm_demand.nn import ModelConfig
from lstm_demand.synthgen import SynthConfig, generate_dataset

log = logging.getLogger("ladder")


def merge(into: EvaluationReport, other: EvaluationReport) -> None:
    for (model, product), errs in other.errors.items():
        into.add(model, product, errs, other.categories.get(product))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/ladder")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--products", type=int, default=6)
    ap.add_argument("--warehouses", type=int, default=2)
    ap.add_argument("--beverage-fraction", type=float, default=0.5)
    ap.add_argument("--max-epochs", type=int, default=70)
    ap.add_argument("--tabular", action="store_true", help="also run the LR and RF benchmarks (slow)")
    ap.add_argument("--rungs", default="univariate,known_orders,feature_search,pretrain,parallel")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rungs = [r.strip() for r in args.rungs.split(",") if r.strip()]
    synth = SynthConfig(
        n_products=args.products, n_warehouses=args.warehouses,
        beverage_fraction=args.beverage_fraction, seed=args.seed,
    )
    series = series_from_dataset(generate_dataset(synth))
    config = ModelConfig(max_epochs=args.max_epochs, rng_seed=args.seed)
    # the ladder is evaluated on the first warehouse; the others feed pretraining
    home = [s for s in series if s.key[1] == "W00"]
    report = EvaluationReport()

    t0 = time.perf_counter()
    for s in home:
        if "univariate" in rungs:
            merge(report, run_univariate(s, config)[1])
        if "known_orders" in rungs:
            merge(report, run_known_orders(s, config)[1])
        prep = s.prepare(FEATURE_SETS["optimal"].columns, config)
        tags = ["ETS", "MPQ", "MDPQ"] + (["LR", "RF"] if args.tabular else [])
        rng = np.random.default_rng([args.seed, len(report.errors)])
        for tag in tags:
            fc = baseline_forecast(tag, s, prep, rng, FEATURE_SETS["optimal"].columns)
            report.add(tag, s.product, fc.errors(), s.category)
        log.info("%s done (%.0fs)", s.key, time.perf_counter() - t0)

    if "feature_search" in rungs:
        names = ("univariate", "known_orders", "calendar", "optimal", "full")
        res = run_feature_search(home, [FEATURE_SETS[n] for n in names], config)
        merge(report, res.report)
        with open(out / "feature_search.csv", "w", encoding="utf-8") as fh:
            fh.write("feature_set,category,val_mmape\n")
            for name, cat, score in res.scores:
                fh.write(f"{name},{cat},{score!r}\n")
        log.info("best feature sets: %s", {c: fs.name for c, fs in res.best.items()})

    if "pretrain" in rungs:
        for s in home:
            related = [r for r in series if r.product == s.product and r.key != s.key]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PretrainFallbackWarning)
                merge(report, run_pretrain(s, related, FEATURE_SETS["optimal"].columns, config)[1])

    if "parallel" in rungs and len(home) >= 2:
        by_cat: dict[str, list] = {}
        for s in home:
            by_cat.setdefault(s.category, []).append(s)
        for cat, group in by_cat.items():
            if len(group) >= 2:
                merge(report, run_parallel(group, FEATURE_SETS["optimal"].columns, config)[1])

    comment = f"ladder seed={args.seed}"
    write_evaluation_csv(out / "evaluation.csv", report, comment)
    write_summary_csv(out / "summary.csv", report, comment)
    plot_report(report, out, prefix="ladder")
    for model, cat, m_mae, m_mmape in report.summary_rows():
        print(f"{model:22s} {cat:10s} MAE {m_mae:8.3f}  mMAPE {m_mmape:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
