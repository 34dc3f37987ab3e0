"""Min-max scaling, moving-window framing and the chronological split."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from dateutil.relativedelta import relativedelta

from . import HORIZON, INPUT_WINDOW
from .ingest import FeatureMatrix

TRAIN_MONTHS = 24
VALIDATION_MONTHS = 3
DEMAND = "demand"


class EmptyFitError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class MinMaxScaler:
    columns: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray
    fitted_on: tuple[dt.date, dt.date] | None = None

    @property
    def spans(self) -> np.ndarray:
        return self.maxs - self.mins

    def transform(self, rows: np.ndarray, columns: Sequence[str] | None = None) -> np.ndarray:
        idx = self._index(columns, np.shape(rows)[-1])
        rows = np.asarray(rows, dtype=float)
        span = self.spans[idx]
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (rows - self.mins[idx]) / safe, 0.0)

    def inverse_transform(self, scaled: np.ndarray, columns: Sequence[str] | None = None) -> np.ndarray:
        idx = self._index(columns, np.shape(scaled)[-1])
        return np.asarray(scaled, dtype=float) * self.spans[idx] + self.mins[idx]

    def transform_column(self, values, column: str) -> np.ndarray:
        return self.transform(np.asarray(values, dtype=float)[..., None], [column])[..., 0]

    def inverse_column(self, values, column: str) -> np.ndarray:
        return self.inverse_transform(np.asarray(values, dtype=float)[..., None], [column])[..., 0]

    def _index(self, columns, width) -> list[int]:
        if columns is None:
            if width != len(self.columns):
                raise SchemaError(f"expected {len(self.columns)} columns, got {width}")
            return list(range(len(self.columns)))
        missing = [c for c in columns if c not in self.columns]
        if missing or len(columns) != width:
            raise SchemaError(f"columns {list(columns)} do not match scaler {list(self.columns)}")
        return [self.columns.index(c) for c in columns]

    def to_text(self) -> str:
        lines = []
        if self.fitted_on is not None:
            lines.append(f"# fitted_on = {self.fitted_on[0].isoformat()} {self.fitted_on[1].isoformat()}")
        for c, lo, hi in zip(self.columns, self.mins, self.maxs):
            lines.append(f"{c} = {float(lo)!r} {float(hi)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MinMaxScaler":
        cols, mins, maxs, fitted = [], [], [], None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                if key.strip() == "fitted_on":
                    a, b = val.split()
                    fitted = (dt.date.fromisoformat(a), dt.date.fromisoformat(b))
                continue
            key, _, val = line.partition("=")
            lo, hi = val.split()
            cols.append(key.strip())
            mins.append(float(lo))
            maxs.append(float(hi))
        return cls(tuple(cols), np.array(mins), np.array(maxs), fitted)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "MinMaxScaler":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def fit_minmax(rows: np.ndarray, columns: Sequence[str], fitted_on=None) -> MinMaxScaler:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyFitError("cannot fit a scaler on zero rows")
    if rows.shape[1] != len(columns):
        raise SchemaError(f"{rows.shape[1]} columns but {len(columns)} names")
    return MinMaxScaler(tuple(columns), rows.min(axis=0), rows.max(axis=0), fitted_on)


def fit_matrix_scaler(matrix: FeatureMatrix, train_stop: int) -> MinMaxScaler:
    """Scaler over the feature columns plus the demand target, fitted on rows [0, train_stop)."""
    data = np.column_stack([matrix.values[:train_stop], matrix.targets[:train_stop]])
    span = (matrix.dates[0], matrix.dates[train_stop - 1]) if train_stop > 0 else None
    return fit_minmax(data, matrix.columns + (DEMAND,), span)


def scale_matrix(matrix: FeatureMatrix, scaler: MinMaxScaler) -> tuple[np.ndarray, np.ndarray]:
    x = scaler.transform(matrix.values, matrix.columns)
    y = scaler.transform_column(matrix.targets, DEMAND)
    return x, y


@dataclass(frozen=True)
class WindowedSample:
    input: np.ndarray
    target: np.ndarray
    origin: int


@dataclass(frozen=True)
class WindowSet:
    """Stacked moving-window samples: inputs (N, w, F), targets (N, h), origins (N,)."""

    inputs: np.ndarray
    targets: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return len(self.origins)

    def __getitem__(self, i) -> WindowedSample:
        return WindowedSample(self.inputs[i], self.targets[i], int(self.origins[i]))

    def __iter__(self) -> Iterator[WindowedSample]:
        return (self[i] for i in range(len(self)))

    def take(self, mask_or_index) -> "WindowSet":
        return WindowSet(self.inputs[mask_or_index], self.targets[mask_or_index], self.origins[mask_or_index])

    def with_targets_in(self, start: int, stop: int, horizon: int = HORIZON) -> "WindowSet":
        """Samples whose target rows origin+1 .. origin+horizon all lie in [start, stop)."""
        keep = (self.origins + 1 >= start) & (self.origins + horizon < stop)
        return self.take(keep)

    @staticmethod
    def concat(sets: Sequence["WindowSet"]) -> "WindowSet":
        return WindowSet(
            np.concatenate([s.inputs for s in sets]),
            np.concatenate([s.targets for s in sets]),
            np.concatenate([s.origins for s in sets]),
        )


def make_windows(x: np.ndarray, y: np.ndarray, w: int = INPUT_WINDOW, h: int = HORIZON) -> WindowSet:
    """Frame a series of L rows into max(0, L-w-h+1) samples.

    The sample with origin o takes input rows o-w+1 .. o and the targets of
    rows o+1 .. o+h.
    """
    if w < 1 or h < 1:
        raise ValueError("window and horizon must be >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n_rows, n_feat = x.shape
    n = max(0, n_rows - w - h + 1)
    if n == 0:
        tail = y.shape[1:] if y.ndim > 1 else ()
        return WindowSet(np.empty((0, w, n_feat)), np.empty((0, h) + tail), np.empty(0, dtype=int))
    xs = np.lib.stride_tricks.sliding_window_view(x, w, axis=0)[:n]  # (n, F, w)
    inputs = np.ascontiguousarray(xs.transpose(0, 2, 1))
    ys = np.lib.stride_tricks.sliding_window_view(y, h, axis=0)[w : w + n]
    if ys.ndim == 3:
        # multi-series targets (rows, P) -> product-major (n, P*h)
        targets = np.ascontiguousarray(ys).reshape(n, -1)
    else:
        targets = np.ascontiguousarray(ys)
    origins = np.arange(w - 1, w - 1 + n)
    return WindowSet(inputs, targets, origins)


@dataclass(frozen=True)
class DataSplit:
    """Row ranges [0, validation_start), [validation_start, test_start), [test_start, n_rows)."""

    n_rows: int
    validation_start: int
    test_start: int
    boundaries: tuple[dt.date, dt.date]

    @property
    def train(self) -> range:
        return range(0, self.validation_start)

    @property
    def validation(self) -> range:
        return range(self.validation_start, self.test_start)

    @property
    def test(self) -> range:
        return range(self.test_start, self.n_rows)


def train_date_range(series_start: dt.date) -> tuple[dt.date, dt.date]:
    return series_start, series_start + relativedelta(months=TRAIN_MONTHS) - dt.timedelta(days=1)


def chronological_split(
    dates: Sequence[dt.date],
    series_start: dt.date | None = None,
    train_months: int = TRAIN_MONTHS,
    validation_months: int = VALIDATION_MONTHS,
) -> DataSplit:
    """Split by calendar months counted from ``series_start`` (defaults to the first date).

    A boundary falling on a closed day snaps to the next row date.
    """
    if not dates:
        raise SplitError("empty series")
    start = series_start or dates[0]
    b_val = start + relativedelta(months=train_months)
    b_test = b_val + relativedelta(months=validation_months)
    if dates[-1] < b_test:
        raise SplitError(
            f"series {start}..{dates[-1]} does not extend past {train_months + validation_months} months"
        )
    v = int(np.searchsorted(np.array(dates, dtype="datetime64[D]"), np.datetime64(b_val)))
    t = int(np.searchsorted(np.array(dates, dtype="datetime64[D]"), np.datetime64(b_test)))
    return DataSplit(len(dates), v, t, (b_val, b_test))


def split_matrix(matrix: FeatureMatrix, series_start: dt.date | None = None) -> DataSplit:
    return chronological_split(matrix.dates, series_start)


@dataclass(frozen=True)
class PreparedSeries:
    """A featurized series with its scaler, split and windows for each split."""

    matrix: FeatureMatrix
    scaler: MinMaxScaler
    split: DataSplit
    windows: WindowSet
    train: WindowSet
    validation: WindowSet
    test: WindowSet


def prepare_series(
    matrix: FeatureMatrix,
    columns: Sequence[str],
    series_start: dt.date | None = None,
    w: int = INPUT_WINDOW,
    h: int = HORIZON,
) -> PreparedSeries:
    sub = matrix.select(columns)
    split = split_matrix(sub, series_start)
    scaler = fit_matrix_scaler(sub, split.validation_start)
    x, y = scale_matrix(sub, scaler)
    windows = make_windows(x, y, w, h)
    return PreparedSeries(
        sub,
        scaler,
        split,
        windows,
        windows.with_targets_in(0, split.validation_start, h),
        windows.with_targets_in(split.validation_start, split.test_start, h),
        windows.with_targets_in(split.test_start, split.n_rows, h),
    )
