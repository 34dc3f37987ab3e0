"""Series-level glue: feature sets, LSTM fitting, baseline forecasts and scoring."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import HORIZON
from . import baselines as bl
from .evaluation import LookaheadErrors, lookahead_errors
from .ingest import DOW_COLUMNS, FEATURE_COLUMNS, FeatureMatrix
from .nn import ModelConfig, TrainedModel, predict, train
from .pipeline import DEMAND, PreparedSeries, WindowSet, prepare_series


class UnknownFeatureSetError(KeyError):
    pass


@dataclass(frozen=True)
class FeatureSet:
    name: str
    columns: tuple[str, ...]

    def __post_init__(self):
        if "prev_demand" not in self.columns:
            raise ValueError("a feature set must contain prev_demand")
        unknown = [c for c in self.columns if c not in FEATURE_COLUMNS]
        if unknown:
            raise ValueError(f"unknown feature columns {unknown}")

    @property
    def width(self) -> int:
        return len(self.columns)


_OPEN = ("store_open_tomorrow", "store_open_day_after")
_HOLIDAY = ("holiday_tomorrow", "holiday_day_after")

FEATURE_SETS = {
    fs.name: fs
    for fs in (
        FeatureSet("univariate", ("prev_demand",)),
        FeatureSet("known_orders", ("prev_demand", "known_orders")),
        FeatureSet("price_promotion", ("prev_demand", "known_orders", "price", "promotion")),
        FeatureSet("calendar", ("prev_demand", "known_orders") + DOW_COLUMNS),
        FeatureSet("optimal", ("prev_demand", "known_orders") + DOW_COLUMNS + _OPEN + _HOLIDAY),
        FeatureSet("full", FEATURE_COLUMNS),
    )
}


def feature_set(name: str) -> FeatureSet:
    try:
        return FEATURE_SETS[name]
    except KeyError:
        raise UnknownFeatureSetError(f"unknown feature set {name!r}; known: {sorted(FEATURE_SETS)}") from None


@dataclass(frozen=True)
class SeriesData:
    matrix: FeatureMatrix
    category: str = "all"
    series_start: Optional[dt.date] = None

    @property
    def key(self) -> tuple[str, str]:
        return self.matrix.series_key

    @property
    def product(self) -> str:
        return self.matrix.series_key[0]

    def prepare(self, columns: Sequence[str], config: Optional[ModelConfig] = None) -> PreparedSeries:
        w = config.input_window if config else 36
        h = config.horizon if config else HORIZON
        return prepare_series(self.matrix, columns, self.series_start, w, h)


def series_from_table(table, cal, categories: Optional[dict] = None, fit_range=None) -> list[SeriesData]:
    """Impute prices, derive features and wrap each (product, warehouse) series."""
    from .ingest import derive_features, impute_prices
    from .pipeline import train_date_range

    start = table.date_span()[0]
    table = impute_prices(table, fit_range or train_date_range(start))
    categories = categories or {}
    return [SeriesData(m, categories.get(m.series_key[0], "all"), start) for m in derive_features(table, cal)]


def series_from_dataset(ds) -> list[SeriesData]:
    """Shortcut for an in-memory synthetic dataset."""
    from .ingest import SalesTable

    cats = {pid: cat for pid, cat, _ in ds.products}
    return series_from_table(SalesTable.from_records(ds.records), ds.calendar, cats)


@dataclass(frozen=True)
class SeriesForecast:
    """Forecasts and actuals in original units for a set of origins."""

    origins: np.ndarray
    forecasts: np.ndarray
    actuals: np.ndarray

    def errors(self) -> LookaheadErrors:
        return lookahead_errors(self.forecasts, self.actuals)


def fit_series(series: SeriesData, columns: Sequence[str], config: ModelConfig, init_params=None) -> tuple[TrainedModel, PreparedSeries]:
    prep = series.prepare(columns, config)
    model = train(config, prep.train, prep.validation, init_params=init_params)
    model = replace(model, scalers=(prep.scaler,), feature_columns=tuple(columns), series_keys=(series.key,))
    return model, prep


def decode(model: TrainedModel, scaled: np.ndarray) -> np.ndarray:
    """Scaled outputs -> original demand units, clamped at zero; (N, P*h) layout kept."""
    h = model.config.horizon
    out = np.empty_like(scaled)
    for p, scaler in enumerate(model.scalers):
        block = slice(p * h, (p + 1) * h)
        out[:, block] = scaler.inverse_column(scaled[:, block], DEMAND)
    return np.maximum(out, 0.0)


def lstm_forecast(model: TrainedModel, windows: WindowSet, demand: np.ndarray) -> SeriesForecast:
    """Forecast every window; actuals come from the unscaled ``demand`` rows."""
    fc = decode(model, predict(model, windows.inputs)) if len(windows) else np.empty((0, model.config.horizon))
    return SeriesForecast(windows.origins, fc, bl.direct_targets(demand, windows.origins, model.config.horizon))


def validation_mmape(model: TrainedModel, prep: PreparedSeries) -> float:
    return lstm_forecast(model, prep.validation, prep.matrix.targets).errors().mean_mmape


def holdout_errors(model: TrainedModel, prep: PreparedSeries) -> LookaheadErrors:
    return lstm_forecast(model, prep.test, prep.matrix.targets).errors()


class OriginError(ValueError):
    pass


def forecast_from_origin(model: TrainedModel, matrices: dict, origin: dt.date) -> np.ndarray:
    """Forecast the ``horizon`` working days after ``origin`` for every series of ``model``.

    ``matrices`` maps series keys to unscaled FeatureMatrix objects. Returns
    (P, horizon) in demand units, clamped at zero.
    """
    w, h = model.config.input_window, model.config.horizon
    n_series = len(model.series_keys)
    per = len(model.feature_columns) // n_series
    blocks = []
    for p, key in enumerate(model.series_keys):
        if key not in matrices:
            raise OriginError(f"no data for series {key}")
        m = matrices[key]
        # parallel models store "product:column" names
        cols = [c.rsplit(":", 1)[-1] for c in model.feature_columns[p * per : (p + 1) * per]]
        try:
            o = m.dates.index(origin)
        except ValueError:
            raise OriginError(f"{origin} is not a working day of series {key}") from None
        if o < w - 1:
            raise OriginError(f"origin {origin} leaves fewer than {w} input rows for {key}")
        sub = m.select(cols).rows(o - w + 1, o + 1)
        blocks.append(model.scalers[p].transform(sub.values, sub.columns))
    x = np.hstack(blocks)[None]
    return decode(model, predict(model, x)).reshape(n_series, h)


# -- baselines at the same origins -------------------------------------------

def baseline_forecast(
    tag: str,
    series: SeriesData,
    prep: PreparedSeries,
    rng: Optional[np.random.Generator] = None,
    columns: Optional[Sequence[str]] = None,
    n_trees: int = 100,
    h: int = HORIZON,
) -> SeriesForecast:
    """Forecast the test origins of ``prep`` with one benchmark model.

    ``ORACLE`` returns the actuals; it exists to check the evaluation path.
    """
    y = series.matrix.targets
    origins = prep.test.origins
    actuals = bl.direct_targets(y, origins, h)
    dates = series.matrix.dates
    if tag == "ORACLE":
        fc = actuals.copy()
    elif tag == "ETS":
        val_origins = prep.validation.origins
        alpha = bl.select_ets_alpha(y, val_origins, h)
        fc = np.stack([bl.ets_forecast(y[:o], alpha, h) for o in origins])
    elif tag == "MPQ":
        fc = np.stack([bl.mpq_forecast(y[:o], h) for o in origins])
    elif tag == "MDPQ":
        wd = bl.weekday_of(dates)
        fc = np.stack([bl.mdpq_forecast(y[:o], wd[:o], wd[o + 1 : o + 1 + h]) for o in origins])
    elif tag in ("LR", "RF"):
        fc = _tabular_forecast(tag, series, prep, rng, columns, n_trees, h)
    else:
        raise ValueError(f"unknown baseline {tag!r}")
    return SeriesForecast(origins, np.maximum(fc, 0.0), actuals)


def _tabular_forecast(tag, series, prep, rng, columns, n_trees, h) -> np.ndarray:
    m = series.matrix.select(columns or prep.matrix.columns)
    y = m.targets
    split = prep.split
    lo = bl.LAG_ROWS - 1
    train_o = np.arange(lo, split.validation_start - h)
    val_o = np.arange(max(lo, split.validation_start - 1), split.test_start - h)
    test_o = prep.test.origins
    design = lambda o: bl.regression_design(m.values, m.columns, o)
    Xtr, Ytr = design(train_o), bl.direct_targets(y, train_o, h)
    if tag == "LR":
        Xv, Yv = design(val_o), bl.direct_targets(y, val_o, h)
        model = bl.fit_lasso_direct(Xtr, Ytr, Xv, Yv)
        return bl.predict_lasso_direct(model, design(test_o))
    rng = rng if rng is not None else np.random.default_rng(0)
    forests = bl.fit_rf_direct(Xtr, Ytr, rng, n_trees)
    return bl.predict_rf_direct(forests, design(test_o))
