"""The experiment ladder: univariate, known orders, feature search, pretraining, parallel."""
from __future__ import annotations

import datetime as dt
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import HORIZON
from .baselines import direct_targets
from .evaluation import AlignmentError, EvaluationReport, lookahead_errors
from .forecasting import (
    FEATURE_SETS,
    FeatureSet,
    SeriesData,
    decode,
    feature_set,
    fit_series,
    lstm_forecast,
    holdout_errors,
    validation_mmape,
)
from .ingest import FeatureMatrix
from .nn import ModelConfig, TrainedModel, predict, train
from .pipeline import DEMAND, PreparedSeries, WindowSet, make_windows, scale_matrix, fit_matrix_scaler, split_matrix

log = logging.getLogger(__name__)

VARIANTS = ("univariate", "known_orders", "feature_search", "pretrain", "parallel")
SPEARMAN_THRESHOLD = 0.2


class UndefinedCorrelationError(ValueError):
    pass


class PretrainFallbackWarning(UserWarning):
    pass


@dataclass
class ExperimentResult:
    models: dict[tuple[str, str], TrainedModel] = field(default_factory=dict)
    report: EvaluationReport = field(default_factory=EvaluationReport)
    scores: list[tuple[str, str, float]] = field(default_factory=list)  # (feature set, category, val mMAPE)
    best: dict[str, FeatureSet] = field(default_factory=dict)


def _run_feature_set(series: SeriesData, fs: FeatureSet, config: ModelConfig, tag: str) -> tuple[TrainedModel, EvaluationReport]:
    model, prep = fit_series(series, fs.columns, config)
    report = EvaluationReport()
    report.add(tag, series.product, holdout_errors(model, prep), series.category)
    return model, report


def run_univariate(series: SeriesData, config: ModelConfig) -> tuple[TrainedModel, EvaluationReport]:
    return _run_feature_set(series, FEATURE_SETS["univariate"], config, "LSTM-univariate")


def run_known_orders(series: SeriesData, config: ModelConfig) -> tuple[TrainedModel, EvaluationReport]:
    return _run_feature_set(series, FEATURE_SETS["known_orders"], config, "LSTM-known_orders")


def run_feature_search(
    series_list: Sequence[SeriesData],
    candidates: Sequence[FeatureSet],
    config: ModelConfig,
) -> ExperimentResult:
    """Train every candidate on every series; pick the lowest validation mean mMAPE per category."""
    if not candidates:
        raise ValueError("no candidate feature sets")
    categories = sorted({s.category for s in series_list})
    result = ExperimentResult()
    for fs in candidates:
        per_cat: dict[str, list[float]] = {c: [] for c in categories}
        for s in series_list:
            model, prep = fit_series(s, fs.columns, config)
            per_cat[s.category].append(validation_mmape(model, prep))
            result.report.add(f"LSTM-{fs.name}", s.product, holdout_errors(model, prep), s.category)
            result.models[(fs.name, s.product)] = model
        for cat in categories:
            result.scores.append((fs.name, cat, float(np.mean(per_cat[cat]))))
    by_name = {fs.name: fs for fs in candidates}
    for cat in categories:
        rows = [(score, i, name) for i, (name, c, score) in enumerate(result.scores) if c == cat]
        result.best[cat] = by_name[min(rows)[2]]
    return result


# -- Spearman gate and pretraining -------------------------------------------

def average_ranks(a) -> np.ndarray:
    """1-based fractional ranks; tied values share the mean of their positions."""
    a = np.asarray(a, dtype=float)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(len(a))
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("spearman needs two 1-d series of equal length")
    if len(a) < 2:
        raise ValueError("spearman needs at least 2 points")
    ra, rb = average_ranks(a), average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    if denom == 0:
        raise UndefinedCorrelationError("constant series has no rank correlation")
    return float(np.clip((ra @ rb) / denom, -1.0, 1.0))


def _train_demand(series: SeriesData) -> dict[dt.date, float]:
    split = split_matrix(series.matrix, series.series_start)
    m = series.matrix
    return {m.dates[i]: m.targets[i] for i in split.train}


def related_correlation(target: SeriesData, other: SeriesData) -> float:
    """Spearman correlation of training-period demand on common dates."""
    a, b = _train_demand(target), _train_demand(other)
    common = sorted(set(a) & set(b))
    return spearman([a[d] for d in common], [b[d] for d in common])


def filter_related(target: SeriesData, related: Sequence[SeriesData], threshold: float = SPEARMAN_THRESHOLD):
    kept = []
    for r in related:
        try:
            rho = related_correlation(target, r)
        except (UndefinedCorrelationError, ValueError):
            continue
        if abs(rho) >= threshold:
            kept.append(r)
    return kept


def run_pretrain(
    target: SeriesData,
    related: Sequence[SeriesData],
    columns: Sequence[str],
    config: ModelConfig,
    threshold: float = SPEARMAN_THRESHOLD,
) -> tuple[TrainedModel, EvaluationReport]:
    """Pretrain on correlated same-product series from other warehouses, then fine-tune on ``target``."""
    kept = filter_related(target, related, threshold)
    report = EvaluationReport()
    if not kept:
        warnings.warn(
            f"no related series reaches |rho| >= {threshold}; training {target.key} without pretraining",
            PretrainFallbackWarning,
            stacklevel=2,
        )
        model, prep = fit_series(target, columns, config)
        report.add("LSTM-pretrain", target.product, holdout_errors(model, prep), target.category)
        return model, report
    preps = [r.prepare(columns, config) for r in kept]
    pooled_train = WindowSet.concat([p.train for p in preps])
    pooled_val = WindowSet.concat([p.validation for p in preps])
    phase1 = train(config, pooled_train, pooled_val)
    model, prep = fit_series(target, columns, config, init_params=phase1.params)
    report.add("LSTM-pretrain", target.product, holdout_errors(model, prep), target.category)
    return model, report


# -- parallel multi-product model ---------------------------------------------

def _aligned(series_list: Sequence[SeriesData]) -> None:
    dates = series_list[0].matrix.dates
    for s in series_list[1:]:
        if s.matrix.dates != dates:
            raise AlignmentError(f"series {s.key} is not aligned with {series_list[0].key}")


def prepare_parallel(series_list: Sequence[SeriesData], columns: Sequence[str], config: ModelConfig):
    """Concatenate per-product features; targets are product-major (p0 k1..k6, p1 k1..k6, ...)."""
    if len(series_list) < 1:
        raise ValueError("need at least one series")
    _aligned(series_list)
    first = series_list[0]
    split = split_matrix(first.matrix.select(columns), first.series_start)
    scalers, xs, ys = [], [], []
    for s in series_list:
        sub = s.matrix.select(columns)
        scaler = fit_matrix_scaler(sub, split.validation_start)
        x, y = scale_matrix(sub, scaler)
        scalers.append(scaler)
        xs.append(x)
        ys.append(y)
    x = np.hstack(xs)
    y = np.column_stack(ys) if len(ys) > 1 else ys[0]
    w, h = config.input_window, config.horizon
    windows = make_windows(x, y, w, h)
    parts = {
        "train": windows.with_targets_in(0, split.validation_start, h),
        "validation": windows.with_targets_in(split.validation_start, split.test_start, h),
        "test": windows.with_targets_in(split.test_start, split.n_rows, h),
    }
    return scalers, split, parts


def run_parallel(
    series_list: Sequence[SeriesData],
    columns: Sequence[str],
    config: ModelConfig,
) -> tuple[TrainedModel, EvaluationReport]:
    """One network forecasting all products at once (6 outputs per product)."""
    if len(series_list) < 2:
        raise ValueError("parallel forecasting needs at least two products")
    return _fit_parallel(series_list, columns, config)


def _fit_parallel(series_list, columns, config):
    scalers, split, parts = prepare_parallel(series_list, columns, config)
    model = train(config, parts["train"], parts["validation"])
    names = tuple(f"{s.product}:{c}" for s in series_list for c in columns)
    model = replace(model, scalers=tuple(scalers), feature_columns=names, series_keys=tuple(s.key for s in series_list))
    report = EvaluationReport()
    test = parts["test"]
    fc = decode(model, predict(model, test.inputs))
    h = config.horizon
    for p, s in enumerate(series_list):
        actual = direct_targets(s.matrix.targets, test.origins, h)
        report.add("LSTM-parallel", s.product, lookahead_errors(fc[:, p * h : (p + 1) * h], actual), s.category)
    return model, report


# -- plans -------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    variant: str
    products: tuple[str, ...] = ()
    feature_sets: tuple[str, ...] = ("optimal",)
    seed: int = 0
    threshold: float = SPEARMAN_THRESHOLD
    warehouse: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for name in self.feature_sets:
            feature_set(name)
        if self.variant == "parallel" and 0 < len(self.products) < 2:
            raise ValueError("parallel variant needs at least two products")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentPlan":
        v = dict(values)
        for key in ("products", "feature_sets"):
            if isinstance(v.get(key), str):
                v[key] = tuple(x.strip() for x in v[key].split(",") if x.strip())
            elif key in v:
                v[key] = tuple(v[key])
        allowed = {"variant", "products", "feature_sets", "seed", "threshold", "warehouse"}
        return cls(**{k: val for k, val in v.items() if k in allowed})
