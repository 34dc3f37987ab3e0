import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lstm_demand.evaluation import AlignmentError
from lstm_demand.experiments import (
    ExperimentPlan,
    PretrainFallbackWarning,
    UndefinedCorrelationError,
    average_ranks,
    filter_related,
    prepare_parallel,
    run_feature_search,
    run_parallel,
    run_pretrain,
    run_univariate,
    spearman,
)
from lstm_demand.forecasting import (
    FEATURE_SETS,
    FeatureSet,
    baseline_forecast,
    fit_series,
    series_from_dataset,
)
from lstm_demand.nn import ModelConfig, evaluate_loss, train
from lstm_demand.synthgen import SynthConfig, generate_dataset

SMALL = ModelConfig(lstm_units=8, dense_units=(8,), max_epochs=3, batch_size=64)


def oracle_ranks(a):
    a = list(a)
    return [1 + sum(x < v for x in a) + (sum(x == v for x in a) - 1) / 2 for v in a]


def oracle_spearman(a, b):
    ra, rb = oracle_ranks(a), oracle_ranks(b)
    n = len(a)
    ma, mb = sum(ra) / n, sum(rb) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = sum((x - ma) ** 2 for x in ra)
    vb = sum((y - mb) ** 2 for y in rb)
    return cov / (va * vb) ** 0.5


@pytest.fixture(scope="module")
def two_series():
    ds = generate_dataset(SynthConfig(n_products=2, months=28, seed=3))
    return series_from_dataset(ds)


# -- spearman ----------------------------------------------------------------

def test_spearman_identity_and_reverse():
    a = np.arange(10.0)
    assert spearman(a, a) == 1.0
    assert spearman(a, a[::-1]) == -1.0


def test_spearman_hand_ranked_ties():
    assert list(average_ranks([1, 2, 2, 3])) == [1.0, 2.5, 2.5, 4.0]
    got = spearman([1, 2, 2, 3], [1, 2, 3, 4])
    assert got == pytest.approx(oracle_spearman([1, 2, 2, 3], [1, 2, 3, 4]), abs=1e-15)
    assert got == pytest.approx(0.9486832980505138)


def test_spearman_all_small_permutations():
    for n in range(2, 6):
        base = list(range(n))
        for perm in itertools.permutations(base):
            assert spearman(base, perm) == pytest.approx(oracle_spearman(base, perm), abs=1e-12)


def test_spearman_errors():
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1], [1])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=3, max_size=30))
def test_spearman_monotone_invariance(pairs):
    a = np.array([p[0] for p in pairs], dtype=float)
    b = np.array([p[1] for p in pairs], dtype=float)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return
    rho = spearman(a, b)
    assert -1.0 <= rho <= 1.0
    assert spearman(a**3 + 5 * a, np.exp(b / 10)) == pytest.approx(rho, abs=1e-12)
    assert spearman(-a, b) == pytest.approx(-rho, abs=1e-12)


# -- feature search ----------------------------------------------------------

def test_feature_set_must_hold_prev_demand():
    with pytest.raises(ValueError):
        FeatureSet("bad", ("known_orders",))
    with pytest.raises(ValueError):
        FeatureSet("bad", ("prev_demand", "nope"))


def test_optimal_set_contents():
    cols = FEATURE_SETS["optimal"].columns
    assert cols[:2] == ("prev_demand", "known_orders")
    assert len(cols) == 12
    assert "price" not in cols and "promotion" not in cols


def test_feature_search_singleton_and_table(two_series):
    res = run_feature_search(two_series, [FEATURE_SETS["univariate"]], SMALL)
    assert res.best == {"food": FEATURE_SETS["univariate"]}
    assert len(res.scores) == 1
    assert sorted(res.report.products("LSTM-univariate")) == ["P000", "P001"]


def test_feature_search_rejects_empty(two_series):
    with pytest.raises(ValueError):
        run_feature_search(two_series, [], SMALL)


def test_known_orders_signal_wins():
    # orders track demand almost exactly, so the origin-day orders are a fresher
    # reading than the lagged demand column
    cfg = SynthConfig(n_products=2, months=28, known_orders_fraction=1.0, order_noise=0.01, seed=5)
    series = series_from_dataset(generate_dataset(cfg))
    model_cfg = ModelConfig(lstm_units=16, dense_units=(16,), max_epochs=15)
    res = run_feature_search(series, [FEATURE_SETS["univariate"], FEATURE_SETS["known_orders"]], model_cfg)
    scores = {name: s for name, _, s in res.scores}
    assert scores["known_orders"] < scores["univariate"]
    assert res.best["food"].name == "known_orders"


def test_univariate_beats_mpq_on_noise_free_weekly_data():
    cfg = SynthConfig(
        n_products=1, months=28, noise_dispersion=0.0, yearly_amplitude=0.0, promo_probability=0.0,
        base_demand=(40.0,), seed=1,
    )
    (series,) = series_from_dataset(generate_dataset(cfg))
    model, report = run_univariate(series, ModelConfig(lstm_units=16, dense_units=(16,), max_epochs=40))
    assert model.params.n_features == 1
    errs = report.errors[("LSTM-univariate", "P000")]
    assert errs.mae.shape == (6,)
    prep = series.prepare(("prev_demand",))
    mpq = baseline_forecast("MPQ", series, prep).errors()
    assert errs.mean_mmape < mpq.mean_mmape


# -- pretraining -------------------------------------------------------------

def test_pretrain_impossible_threshold_falls_back(two_series):
    target, other = two_series
    cols = ("prev_demand", "known_orders")
    with pytest.warns(PretrainFallbackWarning):
        model, report = run_pretrain(target, [other], cols, SMALL, threshold=1.01)
    plain, _ = fit_series(target, cols, SMALL)
    for name, t in plain.params.tensors().items():
        np.testing.assert_array_equal(model.params.tensors()[name], t)
    assert ("LSTM-pretrain", "P000") in report.errors


def test_pretrain_empty_related_matches_plain(two_series):
    target = two_series[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PretrainFallbackWarning)
        model, _ = run_pretrain(target, [], ("prev_demand",), SMALL)
    plain, _ = fit_series(target, ("prev_demand",), SMALL)
    assert model.history == plain.history


def test_filter_related_keeps_copies(two_series):
    target = two_series[0]
    assert filter_related(target, [target], 0.2) == [target]
    assert filter_related(target, [target], 1.01) == []


def test_finetune_never_worse_than_start(two_series):
    prep = two_series[0].prepare(("prev_demand",), SMALL)
    phase1 = train(SMALL, prep.train, prep.validation)
    start = evaluate_loss(phase1.params, prep.validation)
    tuned = train(SMALL, prep.train, prep.validation, init_params=phase1.params)
    assert evaluate_loss(tuned.params, prep.validation) <= start
    assert len(tuned.history) <= SMALL.max_epochs


def test_pretrain_with_copies_runs(two_series):
    target = two_series[0]
    model, report = run_pretrain(target, [target], ("prev_demand",), SMALL)
    assert model.best_epoch <= SMALL.max_epochs
    assert report.errors[("LSTM-pretrain", "P000")].mae.shape == (6,)


# -- parallel ----------------------------------------------------------------

def test_parallel_output_dim_and_reports(two_series):
    model, report = run_parallel(two_series, ("prev_demand", "known_orders"), SMALL)
    assert model.params.n_outputs == 12
    assert model.params.n_features == 4
    assert sorted(report.products("LSTM-parallel")) == ["P000", "P001"]


def test_parallel_targets_match_standard_pipeline(two_series):
    cols = ("prev_demand", "known_orders")
    _, _, parts = prepare_parallel(two_series, cols, SMALL)
    for p, s in enumerate(two_series):
        prep = s.prepare(cols, SMALL)
        np.testing.assert_array_equal(parts["test"].targets[:, 6 * p : 6 * p + 6], prep.test.targets)
        np.testing.assert_array_equal(parts["test"].origins, prep.test.origins)


def test_parallel_single_product_is_standard(two_series):
    cols = ("prev_demand",)
    _, _, parts = prepare_parallel(two_series[:1], cols, SMALL)
    prep = two_series[0].prepare(cols, SMALL)
    for name in ("train", "validation", "test"):
        np.testing.assert_array_equal(parts[name].inputs, getattr(prep, name).inputs)
        np.testing.assert_array_equal(parts[name].targets, getattr(prep, name).targets)


def test_parallel_needs_two_and_alignment(two_series):
    with pytest.raises(ValueError):
        run_parallel(two_series[:1], ("prev_demand",), SMALL)
    a, b = two_series
    shorter = type(b)(b.matrix.rows(1, len(b.matrix)), b.category, b.series_start)
    with pytest.raises(AlignmentError):
        prepare_parallel([a, shorter], ("prev_demand",), SMALL)


def test_parallel_substitutes_one_model_two_reports():
    cfg = SynthConfig(n_products=2, months=28, promo_probability=0.1, substitution_pairs=(("P000", "P001", 0.5),), seed=2)
    series = series_from_dataset(generate_dataset(cfg))
    model, report = run_parallel(series, FEATURE_SETS["full"].columns, SMALL)
    assert len(model.series_keys) == 2
    assert set(report.errors) == {("LSTM-parallel", "P000"), ("LSTM-parallel", "P001")}


# -- plans -------------------------------------------------------------------

def test_plan_validation():
    plan = ExperimentPlan.from_mapping({"variant": "parallel", "products": "P000, P001", "feature_sets": "optimal"})
    assert plan.products == ("P000", "P001")
    with pytest.raises(ValueError):
        ExperimentPlan("parallel", products=("P000",))
    with pytest.raises(ValueError):
        ExperimentPlan("bogus")
    with pytest.raises(KeyError):
        ExperimentPlan("univariate", feature_sets=("nope",))
