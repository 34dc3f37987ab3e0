import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lstm_demand.evaluation import (
    AlignmentError,
    EvaluationReport,
    LookaheadErrors,
    MetricError,
    boxplot_stats,
    lookahead_errors,
    mae,
    mmape,
    overall_means,
    plot_report,
    write_boxplot_csv,
    write_evaluation_csv,
    write_summary_csv,
)


def test_mae_examples():
    assert mae([3, 4], [3, 4]) == 0
    assert mae([2, 4], [1, 1]) == 2.0
    assert mae([2, 4], [1, 1]) == mae([1, 1], [2, 4])
    with pytest.raises(MetricError):
        mae([1], [1, 2])
    with pytest.raises(MetricError):
        mae([], [])


def test_mmape_examples():
    assert mmape([5, 6], [5, 6]) == 0
    assert mmape([10], [4]) == 1.2
    assert mmape([1], [0]) == 1.0


finite = st.floats(-1e4, 1e4)


@settings(max_examples=100)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
def test_mmape_nonnegative_zero_iff_equal(pairs):
    F, A = map(list, zip(*pairs))
    v = mmape(F, A)
    assert v >= 0
    assert (v == 0) == (F == A)


def test_mae_homogeneous_mmape_not():
    F, A = np.array([3.0, 8.0, 1.0]), np.array([2.0, 10.0, 0.0])
    assert mae(5 * F, 5 * A) == pytest.approx(5 * mae(F, A), rel=1e-15)
    assert mmape(5 * F, 5 * A) != pytest.approx(mmape(F, A))


def test_lookahead_errors_examples():
    A = np.arange(24.0).reshape(4, 6)
    e = lookahead_errors(A, A)
    assert np.all(e.mae == 0) and np.all(e.mmape == 0) and e.m == 4
    e = lookahead_errors(A + 1, A)
    assert np.all(e.mae == 1)
    e = lookahead_errors(A[:1] + 2, A[:1])
    assert e.m == 1 and np.allclose(e.mmape, 2 / (1 + A[0]))
    with pytest.raises(AlignmentError):
        lookahead_errors(A, A[:3])
    with pytest.raises(AlignmentError):
        lookahead_errors(A, A, [1, 2, 3, 4], [1, 2, 3, 5])


def _row(v):
    return LookaheadErrors(np.full(6, float(v)), np.full(6, float(v) / 10), 3)


def test_overall_means():
    assert overall_means([_row(2.5)]) == (2.5, 0.25)
    assert overall_means([_row(1), _row(3)]) == pytest.approx((2.0, 0.2))
    rng = np.random.default_rng(0)
    rows = [LookaheadErrors(rng.random(6), rng.random(6), 5) for _ in range(7)]
    a = overall_means(rows)
    b = overall_means(rows[::-1])
    c = overall_means([LookaheadErrors(r.mae[::-1], r.mmape[::-1], 5) for r in rows])
    assert a == pytest.approx(b, rel=1e-15) and a == pytest.approx(c, rel=1e-15)
    with pytest.raises(MetricError):
        overall_means([])


def test_boxplot_examples():
    s = boxplot_stats([1, 2, 3, 4, 5])
    assert (s.q1, s.median, s.q3) == (2, 3, 4)
    assert (s.whisker_low, s.whisker_high) == (1, 5) and s.outliers == []
    s = boxplot_stats([7, 7, 7])
    assert s.q1 == s.median == s.q3 == 7 and not s.outliers
    s = boxplot_stats([1, 1, 1, 1, 100], labels="abcde")
    assert s.outliers == [("e", 100.0)]
    assert s.whisker_high == 1
    with pytest.raises(MetricError):
        boxplot_stats([])


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 100)))
def test_boxplot_ordering(v):
    s = boxplot_stats(v)
    assert s.q1 <= s.median <= s.q3
    assert s.whisker_low >= s.q1 - 1.5 * (s.q3 - s.q1) - 1e-9
    assert s.whisker_high <= s.q3 + 1.5 * (s.q3 - s.q1) + 1e-9


def sample_report():
    r = EvaluationReport()
    for i, cat in enumerate(["food", "food", "beverages"]):
        r.add("LSTM", f"P{i}", _row(i + 1), cat)
        r.add("MPQ", f"P{i}", _row(i + 2), cat)
    return r


def test_report_files(tmp_path):
    r = sample_report()
    write_evaluation_csv(tmp_path / "e.csv", r)
    write_summary_csv(tmp_path / "s.csv", r)
    write_boxplot_csv(tmp_path / "b.csv", r)
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert list(rows[0]) == ["product_id", "category", "model", "lookahead", "mae", "mmape"]
    assert len(rows) == 2 * 3 * 6
    summary = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert list(summary[0]) == ["model", "category", "overall_mean_mae", "mean_mmape"]
    food = [s for s in summary if s["model"] == "LSTM" and s["category"] == "food"][0]
    assert float(food["overall_mean_mae"]) == 1.5
    paths = plot_report(r, tmp_path)
    assert sorted(p.name for p in paths) == ["comparison_beverages.svg", "comparison_food.svg"]
    assert paths[0].read_text().lstrip().startswith("<?xml")
