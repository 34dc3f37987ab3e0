"""Command-line entry point: synth, train, tune, evaluate, forecast.

Settings come from a flat ``key = value`` file (``--config``) and can be
overridden with ``--set key=value``. Relative paths in a config file are
resolved against the file's directory. Exit codes: 0 ok, 1 runtime failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import direct_targets
from .evaluation import EvaluationReport, lookahead_errors, plot_report, write_boxplot_csv, write_evaluation_csv, write_summary_csv
from .experiments import (
    VARIANTS,
    PretrainFallbackWarning,
    prepare_parallel,
    run_feature_search,
    run_parallel,
    run_pretrain,
)
from .forecasting import (
    FEATURE_SETS,
    SeriesData,
    UnknownFeatureSetError,
    baseline_forecast,
    decode,
    feature_set,
    fit_series,
    forecast_from_origin,
    OriginError,
    lstm_forecast,
    series_from_table,
    validation_mmape,
)
from .ingest import calendar_for, derive_features, impute_prices, load_holidays_csv, load_product_metadata, load_sales_csv
from .kvfile import parse_value, read_kv, write_kv
from .nn import ModelConfig, TrainedModel, load_model, predict, save_model
from .pipeline import train_date_range
from .synthgen import SynthConfig, SynthConfigError, generate
from .tune import DEFAULT_TRIALS, random_search, write_tuning_csv

log = logging.getLogger("lstm_demand")

BASELINES = ("ETS", "MPQ", "MDPQ", "LR", "RF")
MODEL_KEYS = tuple(f.name for f in fields(ModelConfig) if f.name != "rng_seed")
PATH_KEYS = ("sales", "holidays", "products", "models", "model")
RUN_KEYS = (
    "sales", "holidays", "products", "product_ids", "warehouse", "variant", "feature_set", "feature_sets",
    "threshold", "n_trials", "models", "model", "baselines", "rf_trees", "baseline_features", "origin_date",
    "plots",
) + MODEL_KEYS


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 2."""


# -- configuration -------------------------------------------------------------

def load_settings(args) -> dict:
    settings = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            settings = read_kv(path)
        except Exception as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from None
        base = path.resolve().parent
        for key in PATH_KEYS:
            if isinstance(settings.get(key), str):
                settings[key] = ",".join(str(base / p.strip()) for p in settings[key].split(",") if p.strip())
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        settings[key.strip()] = parse_value(value)
    return settings


def _check_keys(settings: dict, allowed) -> None:
    unknown = sorted(set(settings) - set(allowed))
    if unknown:
        raise UsageError(f"unknown settings: {unknown}")


def _require(settings: dict, key: str):
    if key not in settings:
        raise UsageError(f"missing required setting {key!r}")
    return settings[key]


def _as_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def model_config(settings: dict, seed: int) -> ModelConfig:
    values = {k: settings[k] for k in MODEL_KEYS if k in settings}
    for k in ("dense_units", "dropout_enabled"):
        if k in values:
            v = values[k]
            values[k] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
    if "dense_units" in values and "dropout_enabled" not in values:
        values["dropout_enabled"] = (False,) * len(values["dense_units"])
    try:
        return ModelConfig(**values, rng_seed=seed)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad model settings: {exc}") from None


def header(seed: int, command: str) -> str:
    return f"lstm-demand {__version__} {command} seed={seed}"


# -- data ----------------------------------------------------------------------

def load_series(settings: dict) -> list[SeriesData]:
    sales = Path(_require(settings, "sales"))
    table = load_sales_csv(sales)
    holidays = load_holidays_csv(settings["holidays"]) if settings.get("holidays") else frozenset()
    cats = load_product_metadata(settings["products"]) if settings.get("products") else {}
    cal = calendar_for(table, holidays)
    series = series_from_table(table, cal, cats)
    wanted = set(_as_list(settings.get("product_ids")))
    if wanted:
        series = [s for s in series if s.product in wanted]
    if settings.get("warehouse"):
        series = [s for s in series if s.key[1] == settings["warehouse"]]
    if not series:
        raise UsageError("no series left after product/warehouse selection")
    return series


def _feature_columns(settings: dict, variant: str) -> tuple[str, ...]:
    if variant in ("univariate", "known_orders"):
        return FEATURE_SETS[variant].columns
    return feature_set(settings.get("feature_set", "optimal")).columns


def _pool_map(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _file_stem(key) -> str:
    return f"{key[0]}__{key[1]}"


def _write_history(path: Path, model: TrainedModel, comment: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in model.history:
            w.writerow([epoch, repr(float(tr)), repr(float(va))])


# -- commands ------------------------------------------------------------------

def cmd_synth(settings: dict, seed: Optional[int], out: Path, jobs: int) -> int:
    values = dict(settings)
    values.pop("out", None)
    if seed is not None:
        values["seed"] = seed
    try:
        cfg = SynthConfig.from_mapping(values)
    except SynthConfigError as exc:
        raise UsageError(str(exc)) from None
    paths = generate(cfg, out, header(cfg.seed, "synth"))
    for p in paths.values():
        print(p)
    return 0


def _fit_one(series: SeriesData, columns, config) -> TrainedModel:
    return fit_series(series, columns, config)[0]


def cmd_train(settings: dict, seed: int, out: Path, jobs: int) -> int:
    _check_keys(settings, RUN_KEYS)
    variant = settings.get("variant", "standard")
    if variant not in VARIANTS + ("standard",):
        raise UsageError(f"unknown variant {variant!r}")
    try:
        columns = _feature_columns(settings, variant)
    except UnknownFeatureSetError as exc:
        raise UsageError(str(exc.args[0])) from None
    config = model_config(settings, seed)
    series = load_series(settings)
    comment = header(seed, "train")
    written: dict[str, dict] = {}

    if variant in ("standard", "univariate", "known_orders"):
        tag = "LSTM-" + (variant if variant != "standard" else settings.get("feature_set", "optimal"))
        models = _pool_map(partial(_fit_one, columns=columns, config=config), series, jobs)
        written[tag] = {s.key: m for s, m in zip(series, models)}
    elif variant == "feature_search":
        names = _as_list(settings.get("feature_sets")) or list(FEATURE_SETS)
        try:
            candidates = [feature_set(n) for n in names]
        except UnknownFeatureSetError as exc:
            raise UsageError(str(exc.args[0])) from None
        res = run_feature_search(series, candidates, config)
        with open(out / "feature_search.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_set", "category", "val_mmape", "best"])
            for name, cat, score in res.scores:
                w.writerow([name, cat, repr(score), int(res.best[cat].name == name)])
        tag = "LSTM-feature_search"
        written[tag] = {s.key: res.models[(res.best[s.category].name, s.product)] for s in series}
    elif variant == "pretrain":
        threshold = float(settings.get("threshold", 0.2))
        tag = "LSTM-pretrain"
        written[tag] = {}
        for s in series:
            related = [r for r in series if r.product == s.product and r.key != s.key]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PretrainFallbackWarning)
                model, _ = run_pretrain(s, related, columns, config, threshold)
            written[tag][s.key] = model
    else:
        if len(series) < 2:
            raise UsageError("parallel variant needs at least two series")
        model, _ = run_parallel(series, columns, config)
        written["LSTM-parallel"] = {("parallel", "all"): model}

    for tag, models in written.items():
        mdir = out / "models" / tag
        mdir.mkdir(parents=True, exist_ok=True)
        hdir = out / "history" / tag
        hdir.mkdir(parents=True, exist_ok=True)
        for key, model in models.items():
            save_model(mdir / f"{_file_stem(key)}.npz", model)
            _write_history(hdir / f"{_file_stem(key)}.csv", model, comment)
            print(mdir / f"{_file_stem(key)}.npz")
    return 0


def score_config(config: ModelConfig, series: list, columns) -> tuple[float, int]:
    """Validation mean mMAPE over the selected series, in demand units."""
    scores, epochs = [], []
    for s in series:
        model, prep = fit_series(s, columns, config)
        scores.append(validation_mmape(model, prep))
        epochs.append(model.best_epoch)
    return float(np.mean(scores)), int(round(np.mean(epochs)))


def cmd_tune(settings: dict, seed: int, out: Path, jobs: int) -> int:
    _check_keys(settings, RUN_KEYS)
    variant = settings.get("variant", "standard")
    try:
        columns = _feature_columns(settings, variant)
    except UnknownFeatureSetError as exc:
        raise UsageError(str(exc.args[0])) from None
    n_trials = int(settings.get("n_trials", DEFAULT_TRIALS))
    if n_trials < 1:
        raise UsageError("n_trials must be >= 1")
    series = load_series(settings)
    overrides = {k: settings[k] for k in ("max_epochs", "patience", "batch_size") if k in settings}
    scorer = partial(_score_with_overrides, series=series, columns=columns, overrides=overrides)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials, ranked = random_search(scorer, n_trials, seed, map_fn=pool.map)
    else:
        trials, ranked = random_search(scorer, n_trials, seed)
    comment = header(seed, "tune")
    write_tuning_csv(out / "tuning.csv", trials, comment)
    best = ranked[0]
    values = best.config.to_dict()
    values.update(trial_id=best.trial_id, val_mmape=best.validation_score)
    write_kv(out / "best_config.txt", values, comment)
    print(out / "tuning.csv")
    return 0


def _score_with_overrides(config: ModelConfig, series, columns, overrides) -> tuple[float, int]:
    return score_config(replace(config, **overrides), series, columns)


def _model_files(settings: dict) -> list[tuple[str, Path]]:
    """(tag, file) pairs; a directory contributes its .npz files under its own name."""
    found = []
    for entry in _as_list(settings.get("models")):
        p = Path(entry)
        if p.is_dir():
            found += [(p.name, f) for f in sorted(p.glob("*.npz"))]
        elif p.is_file():
            found.append((p.parent.name, p))
        else:
            raise UsageError(f"model path not found: {p}")
    return found


def _baseline_job(item, tags, columns, n_trees, seed):
    idx, s = item
    prep = s.prepare(columns)
    rng = np.random.default_rng([seed, idx])
    return [(tag, baseline_forecast(tag, s, prep, rng, columns, n_trees).errors()) for tag in tags]


def cmd_evaluate(settings: dict, seed: int, out: Path, jobs: int) -> int:
    _check_keys(settings, RUN_KEYS)
    tags = _as_list(settings.get("baselines", ",".join(BASELINES)))
    bad = [t for t in tags if t not in BASELINES + ("ORACLE",)]
    if bad:
        raise UsageError(f"unknown baseline tags {bad}")
    try:
        columns = feature_set(settings.get("baseline_features", "optimal")).columns
    except UnknownFeatureSetError as exc:
        raise UsageError(str(exc.args[0])) from None
    files = _model_files(settings)
    if not files and not tags:
        raise UsageError("nothing to evaluate: give models and/or baselines")
    series = load_series(settings)
    by_key = {s.key: s for s in series}
    report = EvaluationReport()

    for tag, path in files:
        model = load_model(path)
        h = model.config.horizon
        n = len(model.series_keys)
        missing = [k for k in model.series_keys if k not in by_key]
        if missing:
            raise UsageError(f"{path}: series {missing} not in the selected data")
        if n == 1:
            s = by_key[model.series_keys[0]]
            prep = s.prepare(model.feature_columns, model.config)
            report.add(tag, s.product, lstm_forecast(model, prep.test, s.matrix.targets).errors(), s.category)
            continue
        group = [by_key[k] for k in model.series_keys]
        cols = [c.rsplit(":", 1)[-1] for c in model.feature_columns[: len(model.feature_columns) // n]]
        _, _, parts = prepare_parallel(group, cols, model.config)
        test = parts["test"]
        fc = decode(model, predict(model, test.inputs))
        for p, s in enumerate(group):
            actual = direct_targets(s.matrix.targets, test.origins, h)
            report.add(tag, s.product, lookahead_errors(fc[:, p * h : (p + 1) * h], actual), s.category)

    n_trees = int(settings.get("rf_trees", 100))
    job = partial(_baseline_job, tags=tags, columns=columns, n_trees=n_trees, seed=seed)
    for s, results in zip(series, _pool_map(job, list(enumerate(series)), jobs)):
        for tag, errs in results:
            report.add(tag, s.product, errs, s.category)

    comment = header(seed, "evaluate")
    write_evaluation_csv(out / "evaluation.csv", report, comment)
    write_summary_csv(out / "summary.csv", report, comment)
    write_boxplot_csv(out / "boxplot.csv", report, comment)
    if settings.get("plots", True):
        plot_dir = out / "plots"
        plot_dir.mkdir(exist_ok=True)
        plot_report(report, plot_dir)
    print(out / "summary.csv")
    return 0


def cmd_forecast(settings: dict, seed: int, out: Path, jobs: int) -> int:
    _check_keys(settings, RUN_KEYS)
    files = [p for _, p in _model_files({"models": settings.get("models", settings.get("model"))})]
    if not files:
        raise UsageError("forecast needs 'model' (a .npz file or directory)")
    origin_text = str(_require(settings, "origin_date"))
    try:
        origin = dt.date.fromisoformat(origin_text)
    except ValueError:
        raise UsageError(f"bad origin_date {origin_text!r}") from None
    table = load_sales_csv(Path(_require(settings, "sales")))
    holidays = load_holidays_csv(settings["holidays"]) if settings.get("holidays") else frozenset()
    cal = calendar_for(table, holidays)
    table = impute_prices(table, train_date_range(table.date_span()[0]))
    matrices = {m.series_key: m for m in derive_features(table, cal)}
    rows = []
    for path in files:
        model = load_model(path)
        try:
            fc = forecast_from_origin(model, matrices, origin)
        except OriginError as exc:
            raise UsageError(str(exc)) from None
        for (product, warehouse), block in zip(model.series_keys, fc):
            for k, v in enumerate(block, start=1):
                rows.append((product, warehouse, origin.isoformat(), k, repr(float(v))))
    rows.sort(key=lambda r: (r[0], r[1], r[3]))
    with open(out / "forecast.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header(seed, 'forecast')}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "warehouse_id", "origin_date", "lookahead", "forecast"])
        w.writerows(rows)
    print(out / "forecast.csv")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "forecast": cmd_forecast,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--seed", type=int, help="master seed (default 0; synth: the config's seed)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--jobs", type=int, help="worker processes for per-series work")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="lstm-demand", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("out", "."), ("jobs", 1), ("set", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = load_settings(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed
        if args.command != "synth":
            seed = 0 if seed is None else seed
        return COMMANDS[args.command](settings, seed, out, max(1, args.jobs))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: bad data, numeric trouble, I/O
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
