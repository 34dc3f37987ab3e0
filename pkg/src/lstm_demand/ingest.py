"""CSV loading, mean-price imputation and the engineered feature table."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    WEEKDAY_NAMES,
    ProductId,
    SalesRecord,
    StoreCalendar,
    WarehouseId,
    day_of_week_onehot,
)

SALES_HEADER = ("date", "product_id", "warehouse_id", "demand", "price", "promotion", "known_orders")

DOW_COLUMNS = tuple(f"dow_{name}" for name in WEEKDAY_NAMES)
FEATURE_COLUMNS = (
    ("prev_demand", "known_orders", "price", "promotion")
    + DOW_COLUMNS
    + ("store_open_tomorrow", "store_open_day_after", "holiday_tomorrow", "holiday_day_after")
)
BINARY_COLUMNS = frozenset(FEATURE_COLUMNS[3:])

SeriesKey = tuple[ProductId, WarehouseId]


class ParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class DuplicateRecordError(ValueError):
    pass


class ImputationError(ValueError):
    pass


class TooShortSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class SalesTable:
    groups: dict[SeriesKey, tuple[SalesRecord, ...]]

    @classmethod
    def from_records(cls, records: Iterable[SalesRecord]) -> "SalesTable":
        buckets: dict[SeriesKey, list[SalesRecord]] = {}
        for r in records:
            buckets.setdefault(r.key, []).append(r)
        groups = {}
        for key in sorted(buckets):
            rows = sorted(buckets[key], key=lambda r: r.date)
            for a, b in zip(rows, rows[1:]):
                if a.date == b.date:
                    raise DuplicateRecordError(f"duplicate record {b.date} {key[0]} {key[1]}")
            groups[key] = tuple(rows)
        return cls(groups)

    @property
    def records(self) -> list[SalesRecord]:
        return [r for rows in self.groups.values() for r in rows]

    def __len__(self) -> int:
        return sum(len(rows) for rows in self.groups.values())

    def date_span(self) -> tuple[dt.date, dt.date]:
        dates = [r.date for rows in self.groups.values() for r in (rows[0], rows[-1])]
        return min(dates), max(dates)

    def subset(self, keys: Iterable[SeriesKey]) -> "SalesTable":
        return SalesTable({k: self.groups[k] for k in keys})


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def skip_comments(fh) -> int:
    """Advance past leading ``#`` lines; returns how many were skipped."""
    n = 0
    while True:
        pos = fh.tell()
        line = fh.readline()
        if not line.startswith("#"):
            fh.seek(pos)
            return n
        n += 1


def load_sales_csv(path) -> SalesTable:
    records = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        skipped = skip_comments(fh)
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SALES_HEADER:
            raise ParseError(skipped + 1, f"expected header {','.join(SALES_HEADER)}")
        for row in reader:
            line = reader.line_num + skipped
            if not row:
                continue
            if len(row) != len(SALES_HEADER):
                raise ParseError(line, f"expected {len(SALES_HEADER)} columns, got {len(row)}")
            try:
                date = _parse_date(row[0])
                demand = float(row[3])
                price = float(row[4]) if row[4].strip() else None
                promo = row[5].strip()
                if promo not in ("0", "1"):
                    raise ValueError(f"promotion must be 0 or 1, got {promo!r}")
                rec = SalesRecord(
                    date=date,
                    product=ProductId(row[1].strip()),
                    warehouse=WarehouseId(row[2].strip()),
                    demand=demand,
                    price=price,
                    promotion=promo == "1",
                    known_orders=float(row[6]),
                )
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
            key = (rec.date, rec.product, rec.warehouse)
            if key in seen:
                raise DuplicateRecordError(f"line {line}: duplicate record {key[0]} {key[1]} {key[2]}")
            seen.add(key)
            records.append(rec)
    return SalesTable.from_records(records)


def write_sales_csv(path, records: Iterable[SalesRecord], comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SALES_HEADER)
        for r in records:
            w.writerow([
                r.date.isoformat(), r.product, r.warehouse, _fmt(r.demand),
                "" if r.price is None else _fmt(r.price), int(r.promotion), _fmt(r.known_orders),
            ])


def _fmt(x: float) -> str:
    x = float(x)
    if x == int(x):
        return str(int(x))
    return f"{x:.6f}".rstrip("0")


def load_holidays_csv(path) -> frozenset[dt.date]:
    out = set()
    with open(path, newline="", encoding="utf-8") as fh:
        skipped = skip_comments(fh)
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date"]:
            raise ParseError(skipped + 1, "expected header 'date'")
        for row in reader:
            if not row:
                continue
            try:
                out.add(_parse_date(row[0]))
            except ValueError as exc:
                raise ParseError(reader.line_num + skipped, str(exc)) from None
    return frozenset(out)


def load_product_metadata(path) -> dict[str, str]:
    """Map product id to category from a ``product_id,category,base_demand`` file."""
    with open(path, newline="", encoding="utf-8") as fh:
        skip_comments(fh)
        return {row["product_id"]: row["category"] for row in csv.DictReader(fh)}


def calendar_for(table: SalesTable, holidays: Iterable[dt.date] = ()) -> StoreCalendar:
    """Calendar covering the table's date span; every record must fall on an open day."""
    start, end = table.date_span()
    cal = StoreCalendar.from_range(start, end, holidays)
    for key, rows in table.groups.items():
        for r in rows:
            if not cal.is_open(r.date):
                raise ParseError(0, f"record on closed day {r.date} for {key}")
    return cal


def impute_prices(table: SalesTable, fit_range: tuple[dt.date, dt.date]) -> SalesTable:
    """Fill missing prices with the group's mean observed price inside ``fit_range``."""
    lo, hi = fit_range
    groups = {}
    for key, rows in table.groups.items():
        if all(r.price is not None for r in rows):
            groups[key] = rows
            continue
        observed = [r.price for r in rows if r.price is not None and lo <= r.date <= hi]
        if not observed:
            raise ImputationError(f"no observed price for {key[0]}/{key[1]} in {lo}..{hi}")
        mean = float(np.mean(observed))
        groups[key] = tuple(
            r if r.price is not None else _replace_price(r, mean) for r in rows
        )
    return SalesTable(groups)


def _replace_price(r: SalesRecord, price: float) -> SalesRecord:
    return SalesRecord(r.date, r.product, r.warehouse, r.demand, price, r.promotion, r.known_orders)


@dataclass(frozen=True)
class FeatureMatrix:
    """Engineered features for one series; row t describes working day ``dates[t]``.

    ``values[t]`` holds only information available before day t's demand is
    observed, and ``targets[t]`` is that demand.
    """

    series_key: SeriesKey
    dates: tuple[dt.date, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in columns]
        return FeatureMatrix(self.series_key, self.dates, tuple(columns), self.values[:, idx], self.targets)

    def rows(self, start: int, stop: int) -> "FeatureMatrix":
        return FeatureMatrix(
            self.series_key, self.dates[start:stop], self.columns,
            self.values[start:stop], self.targets[start:stop],
        )


def derive_features(table: SalesTable, cal: StoreCalendar) -> list[FeatureMatrix]:
    out = []
    one, two = dt.timedelta(days=1), dt.timedelta(days=2)
    for key, rows in table.groups.items():
        if len(rows) < 2:
            raise TooShortSeriesError(f"series {key} has {len(rows)} rows; need at least 2")
        if any(r.price is None for r in rows):
            raise ImputationError(f"series {key} has missing prices; impute first")
        n = len(rows) - 1
        values = np.zeros((n, len(FEATURE_COLUMNS)))
        for t, (prev, cur) in enumerate(zip(rows, rows[1:])):
            d = cur.date
            values[t, 0] = prev.demand
            values[t, 1] = cur.known_orders
            values[t, 2] = cur.price
            values[t, 3] = float(cur.promotion)
            values[t, 4:10] = day_of_week_onehot(d)
            values[t, 10] = cal.is_open(d + one)
            values[t, 11] = cal.is_open(d + two)
            values[t, 12] = cal.is_holiday(d + one)
            values[t, 13] = cal.is_holiday(d + two)
        targets = np.array([r.demand for r in rows[1:]], dtype=float)
        out.append(FeatureMatrix(key, tuple(r.date for r in rows[1:]), FEATURE_COLUMNS, values, targets))
    return out


def load_dataset(sales_path, holidays_path=None, fit_range=None):
    """Load, impute and featurize in one go; returns (table, calendar, matrices)."""
    table = load_sales_csv(sales_path)
    holidays = load_holidays_csv(holidays_path) if holidays_path else frozenset()
    cal = calendar_for(table, holidays)
    if fit_range is None:
        from .pipeline import train_date_range

        fit_range = train_date_range(table.date_span()[0])
    table = impute_prices(table, fit_range)
    return table, cal, derive_features(table, cal)
