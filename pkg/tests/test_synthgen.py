import datetime as dt

import numpy as np
import pytest

from lstm_demand.ingest import load_holidays_csv, load_sales_csv
from lstm_demand.synthgen import SynthConfig, SynthConfigError, generate, generate_dataset, german_holidays


def small(**kw):
    return SynthConfig(**{**dict(n_products=2, n_warehouses=2, months=28, seed=3), **kw})


def test_same_seed_byte_identical(tmp_path):
    a = generate(small(), tmp_path / "a")
    b = generate(small(), tmp_path / "b")
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    c = generate(small(seed=4), tmp_path / "c")
    assert a["sales"].read_bytes() != c["sales"].read_bytes()


def test_noise_free_closed_form():
    cfg = small(noise_dispersion=0.0, yearly_amplitude=0.0, promo_probability=0.0, base_demand=(20.0, 33.0),
                warehouse_spread=0.0)
    ds = generate_dataset(cfg)
    base = {"P000": 20.0, "P001": 33.0}
    for r in ds.records:
        assert r.demand == round(base[r.product] * cfg.weekly_profile[r.date.weekday()])


def test_row_count_and_calendar(tmp_path):
    cfg = small()
    paths = generate(cfg, tmp_path)
    table = load_sales_csv(paths["sales"])
    holidays = load_holidays_csv(paths["holidays"])
    d = cfg.start
    open_days = 0
    while d <= cfg.end:
        open_days += d.weekday() != 6 and d not in holidays
        d += dt.timedelta(days=1)
    assert len(table) == cfg.n_products * cfg.n_warehouses * open_days
    for r in table.records:
        assert r.date.weekday() != 6 and r.date not in holidays


def test_known_orders_exact_when_noise_free():
    ds = generate_dataset(small(known_orders_fraction=1.0, order_noise=0.0))
    assert all(r.known_orders == r.demand for r in ds.records)


def test_weekly_profile_recovered():
    cfg = SynthConfig(n_products=1, months=28, noise_dispersion=0.1, yearly_amplitude=0.0,
                      promo_probability=0.0, base_demand=(200.0,), seed=1)
    ds = generate_dataset(cfg)
    recs = [r for r in ds.records if r.date < cfg.start + dt.timedelta(days=730)]
    y = np.array([r.demand for r in recs])
    wd = np.array([r.date.weekday() for r in recs])
    profile = np.array([y[wd == k].mean() for k in range(6)]) / y.mean()
    expected = np.array(cfg.weekly_profile) / np.mean(np.array(cfg.weekly_profile)[wd])
    np.testing.assert_allclose(profile, expected, rtol=0.05)


def test_substitution_shifts_demand():
    cfg = SynthConfig(n_products=2, months=28, promo_probability=0.2, noise_dispersion=0.0, yearly_amplitude=0.0,
                      base_demand=(50.0, 50.0), substitution_pairs=(("P000", "P001", 0.5),), seed=2)
    ds = generate_dataset(cfg)
    by = {(r.product, r.date): r for r in ds.records}
    a_only = [d for d in ds.calendar.open_days if by[("P000", d)].promotion and not by[("P001", d)].promotion]
    assert a_only
    for d in a_only:
        expected_b = round(50 * cfg.weekly_profile[d.weekday()] * 0.5)
        assert by[("P001", d)].demand == expected_b


def test_german_holidays():
    h = german_holidays([2019])
    assert dt.date(2019, 4, 19) in h and dt.date(2019, 4, 22) in h  # Good Friday, Easter Monday
    assert dt.date(2019, 10, 3) in h and len(h) == 9


@pytest.mark.parametrize("kw", [dict(months=20), dict(weekly_profile=(1, 1, 1)), dict(promo_probability=1.5),
                                dict(substitution_pairs=(("P000", "P999", 0.1),)), dict(base_demand=(1.0,))])
def test_invalid_config(kw):
    with pytest.raises(SynthConfigError):
        small(**kw)


def test_from_mapping_rejects_unknown():
    with pytest.raises(SynthConfigError):
        SynthConfig.from_mapping({"n_products": 2, "bogus": 1})
    assert SynthConfig.from_mapping({"n_products": 3}).n_products == 3
