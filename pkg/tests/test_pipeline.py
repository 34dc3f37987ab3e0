import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lstm_demand.core import StoreCalendar
from lstm_demand.pipeline import (
    EmptyFitError,
    MinMaxScaler,
    SchemaError,
    SplitError,
    chronological_split,
    fit_minmax,
    make_windows,
)


def enumerate_origins(L, w, h):
    # brute force: every o whose inputs o-w+1..o and targets o+1..o+h fit in 0..L-1
    return [o for o in range(L) if o - w + 1 >= 0 and o + h <= L - 1]


def test_scaler_examples():
    s = fit_minmax(np.array([[0.0, 3.0], [10.0, 3.0]]), ["a", "c"])
    assert s.transform(np.array([[5.0, 3.0]])).tolist() == [[0.5, 0.0]]
    assert s.transform(np.array([[0.0, 3.0], [10.0, 3.0]]))[:, 0].tolist() == [0.0, 1.0]
    assert s.transform(np.array([[20.0, 7.0]]))[0, 0] == 2.0  # unclipped
    assert s.inverse_transform(np.array([[0.5, 0.0]])).tolist() == [[5.0, 3.0]]
    assert np.all(s.transform(s.mins[None]) == 0)


def test_scaler_errors():
    with pytest.raises(EmptyFitError):
        fit_minmax(np.empty((0, 2)), ["a", "b"])
    s = fit_minmax(np.ones((2, 2)), ["a", "b"])
    with pytest.raises(SchemaError):
        s.transform(np.ones((1, 3)))
    with pytest.raises(SchemaError):
        s.transform(np.ones((1, 1)), ["z"])


def test_scaler_refit_identical(rng):
    x = rng.normal(size=(50, 3))
    a, b = fit_minmax(x, "abc"), fit_minmax(x, "abc")
    assert np.array_equal(a.mins, b.mins) and np.array_equal(a.maxs, b.maxs)


def test_scaler_text_round_trip(tmp_path, rng):
    s = fit_minmax(rng.normal(size=(20, 2)), ["x", "demand"], (dt.date(2020, 1, 1), dt.date(2021, 12, 31)))
    s.save(tmp_path / "scaler.txt")
    back = MinMaxScaler.load(tmp_path / "scaler.txt")
    assert back.columns == s.columns and back.fitted_on == s.fitted_on
    assert np.array_equal(back.mins, s.mins) and np.array_equal(back.maxs, s.maxs)


@settings(max_examples=50)
@given(arrays(np.float64, (30, 4), elements=st.floats(-1e6, 1e6)))
def test_scaler_round_trip_property(x):
    s = fit_minmax(x, list("abcd"))
    back = s.inverse_transform(s.transform(x))
    span = s.spans
    for j in range(4):
        if span[j] > 0:
            np.testing.assert_allclose(back[:, j], x[:, j], rtol=1e-9, atol=1e-9 * max(1.0, span[j]))
        else:
            assert np.all(back[:, j] == s.mins[j])


@pytest.mark.parametrize("L,expected", [(50, 9), (42, 1), (41, 0), (0, 0)])
def test_window_counts(L, expected):
    ws = make_windows(np.zeros((L, 2)), np.zeros(L), 36, 6)
    assert len(ws) == expected == len(enumerate_origins(L, 36, 6))


@given(st.integers(0, 80), st.integers(1, 10), st.integers(1, 6))
def test_window_contents(L, w, h):
    x = np.arange(L, dtype=float)[:, None] * np.array([1.0, -1.0])
    y = 1000 + np.arange(L, dtype=float)
    ws = make_windows(x, y, w, h)
    assert ws.origins.tolist() == enumerate_origins(L, w, h)
    for s in ws:
        assert s.input.shape == (w, 2)
        assert s.input[:, 0].tolist() == list(range(s.origin - w + 1, s.origin + 1))
        assert s.target.tolist() == [1000 + s.origin + k for k in range(1, h + 1)]


def test_window_targets_in_split():
    ws = make_windows(np.zeros((100, 1)), np.arange(100.0), 36, 6)
    sub = ws.with_targets_in(60, 80)
    assert sub.origins.min() == 59 and sub.origins.max() == 73
    assert sub.targets.min() >= 60 and sub.targets.max() <= 79


def test_make_windows_rejects_bad_sizes():
    with pytest.raises(ValueError):
        make_windows(np.zeros((5, 1)), np.zeros(5), 0, 6)


def _dates(start, end):
    return list(StoreCalendar.from_range(start, end).open_days)


def test_split_29_months():
    dates = _dates(dt.date(2017, 1, 2), dt.date(2019, 6, 1))
    sp = chronological_split(dates)
    assert dates[sp.validation_start] == dt.date(2019, 1, 2)
    assert dates[sp.test_start] == dt.date(2019, 4, 2)
    assert dates[sp.validation_start - 1] < dt.date(2019, 1, 2)
    assert len(sp.train) + len(sp.validation) + len(sp.test) == len(dates)


def test_split_snaps_to_next_open_day():
    # 2017-01-01 start -> boundary 2019-01-01 is a holiday-like closed day here (Tuesday, but excluded)
    cal = StoreCalendar.from_range(dt.date(2017, 1, 2), dt.date(2019, 6, 1), {dt.date(2019, 1, 2)})
    dates = list(cal.open_days)
    sp = chronological_split(dates, series_start=dt.date(2017, 1, 2))
    assert dates[sp.validation_start] == dt.date(2019, 1, 3)


def test_split_too_short():
    with pytest.raises(SplitError):
        chronological_split(_dates(dt.date(2017, 1, 2), dt.date(2018, 9, 1)))
