"""Shared domain types and working-day calendar arithmetic."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, NewType, Optional

import numpy as np

ProductId = NewType("ProductId", str)
WarehouseId = NewType("WarehouseId", str)

WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat")
SUNDAY = 6


class InvalidWeekdayError(ValueError):
    pass


class CalendarError(ValueError):
    pass


def is_working_weekday(d: dt.date) -> bool:
    return d.weekday() != SUNDAY


@dataclass(frozen=True)
class StoreCalendar:
    """Open days of the store (Monday to Saturday minus public holidays)."""

    open_days: tuple[dt.date, ...]
    holidays: frozenset[dt.date] = frozenset()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        days = tuple(self.open_days)
        object.__setattr__(self, "open_days", days)
        object.__setattr__(self, "holidays", frozenset(self.holidays))
        for a, b in zip(days, days[1:]):
            if not a < b:
                raise CalendarError(f"open days not strictly increasing at {b}")
        clash = self.holidays.intersection(days)
        if clash:
            raise CalendarError(f"holiday listed as open day: {min(clash)}")
        if days:
            expected = _open_days_between(days[0], days[-1], self.holidays)
            if len(expected) != len(days):
                missing = sorted(set(expected) - set(days))
                extra = sorted(set(days) - set(expected))
                bad = (missing or extra)[0]
                raise CalendarError(f"open days inconsistent with Mon-Sat rule at {bad}")
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(days)})

    @classmethod
    def from_range(cls, start: dt.date, end: dt.date, holidays: Iterable[dt.date] = ()) -> "StoreCalendar":
        hol = frozenset(holidays)
        return cls(tuple(_open_days_between(start, end, hol)), hol)

    def is_open(self, d: dt.date) -> bool:
        # valid beyond the covered range too: the rule is Mon-Sat minus holidays
        return is_working_weekday(d) and d not in self.holidays

    def is_holiday(self, d: dt.date) -> bool:
        return d in self.holidays

    def __len__(self) -> int:
        return len(self.open_days)


def _open_days_between(start: dt.date, end: dt.date, holidays) -> list[dt.date]:
    out = []
    d = start
    one = dt.timedelta(days=1)
    while d <= end:
        if is_working_weekday(d) and d not in holidays:
            out.append(d)
        d += one
    return out


def working_day_index(date: dt.date, cal: StoreCalendar) -> Optional[int]:
    """Position of ``date`` among the open days, or None when the store is closed."""
    return cal._index.get(date)


def day_of_week_onehot(date: dt.date) -> np.ndarray:
    wd = date.weekday()
    if wd == SUNDAY:
        raise InvalidWeekdayError(f"{date} is a Sunday; the store is closed")
    out = np.zeros(6, dtype=np.int8)
    out[wd] = 1
    return out


@dataclass(frozen=True)
class SalesRecord:
    date: dt.date
    product: ProductId
    warehouse: WarehouseId
    demand: float
    price: Optional[float]
    promotion: bool
    known_orders: float

    def __post_init__(self):
        if not self.product:
            raise ValueError("empty product id")
        if not self.warehouse:
            raise ValueError("empty warehouse id")
        if not self.demand >= 0:
            raise ValueError(f"negative or invalid demand: {self.demand}")
        if not self.known_orders >= 0:
            raise ValueError(f"negative or invalid known_orders: {self.known_orders}")
        if self.price is not None and not self.price > 0:
            raise ValueError(f"non-positive price: {self.price}")

    @property
    def key(self) -> tuple[ProductId, WarehouseId]:
        return (self.product, self.warehouse)
