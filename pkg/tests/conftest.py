import datetime as dt

import numpy as np
import pytest

from lstm_demand.core import SalesRecord, StoreCalendar


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_records(dates, demands, product="P1", warehouse="W1", prices=None, known=None, promo=None):
    prices = prices or [1.5] * len(dates)
    known = known or [0.0] * len(dates)
    promo = promo or [False] * len(dates)
    return [
        SalesRecord(d, product, warehouse, float(y), p, bool(pr), float(k))
        for d, y, p, k, pr in zip(dates, demands, prices, known, promo)
    ]


@pytest.fixture
def week_calendar():
    # Mon 2024-01-01 is a holiday in this fixture
    return StoreCalendar.from_range(dt.date(2024, 1, 1), dt.date(2024, 1, 31), {dt.date(2024, 1, 1)})


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str, float, str]] = {}


class Criterion:
    """Context manager recording PASS/FAIL, runtime and a detail string for one criterion."""

    def __init__(self, number: int, title: str, limit_s: float):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.detail = ""

    def __enter__(self):
        import time

        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time

        elapsed = time.perf_counter() - self._t0
        ok = exc_type is None and elapsed < self.limit_s
        detail = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}".splitlines()[0]
        ACCEPTANCE[self.number] = ("PASS" if ok else "FAIL", self.title, elapsed, detail)
        if exc_type is None and not ok:
            raise AssertionError(f"criterion {self.number} took {elapsed:.1f}s, limit {self.limit_s}s")
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, elapsed, detail = ACCEPTANCE[n]
        line = f"[{status}] {n:2d}. {title} ({elapsed:.1f}s)"
        terminalreporter.write_line(line + (f" :: {detail}" if detail else ""))
