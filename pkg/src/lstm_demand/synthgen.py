"""Seeded synthetic e-grocery sales with weekly/yearly seasonality, promotions and known orders."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
from dateutil.easter import easter
from dateutil.relativedelta import relativedelta

from .core import SalesRecord, StoreCalendar, ProductId, WarehouseId
from .ingest import write_sales_csv


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_products: int = 10
    n_warehouses: int = 1
    months: int = 29
    start_date: str = "2016-09-05"
    base_demand: tuple[float, ...] = ()
    weekly_profile: tuple[float, ...] = (0.8, 0.85, 0.9, 1.0, 1.2, 1.45)
    yearly_amplitude: float = 0.25
    promo_probability: float = 0.03
    promo_price_drop: float = 0.2
    promo_demand_lift: float = 1.5
    known_orders_fraction: float = 0.8
    order_noise: float = 0.05
    noise_dispersion: float = 0.15
    price_missing_probability: float = 0.005
    beverage_fraction: float = 0.0
    warehouse_spread: float = 0.3
    substitution_pairs: tuple[tuple[str, str, float], ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_demand", tuple(float(b) for b in self.base_demand))
        object.__setattr__(self, "weekly_profile", tuple(float(w) for w in self.weekly_profile))
        object.__setattr__(
            self, "substitution_pairs", tuple((str(a), str(b), float(s)) for a, b, s in self.substitution_pairs)
        )
        self.validate()

    def validate(self) -> None:
        if self.n_products < 1 or self.n_warehouses < 1:
            raise SynthConfigError("need at least one product and one warehouse")
        if self.months < 28:
            raise SynthConfigError("months must be >= 28 for the 24/3/remainder split")
        if len(self.weekly_profile) != 6 or min(self.weekly_profile) <= 0:
            raise SynthConfigError("weekly_profile needs 6 positive multipliers")
        if self.base_demand and len(self.base_demand) != self.n_products:
            raise SynthConfigError("base_demand must list one value per product")
        if any(b <= 0 for b in self.base_demand):
            raise SynthConfigError("base_demand must be positive")
        for name in ("promo_probability", "known_orders_fraction", "price_missing_probability",
                     "beverage_fraction", "promo_price_drop"):
            if not 0 <= getattr(self, name) <= 1:
                raise SynthConfigError(f"{name} must lie in [0, 1]")
        if self.noise_dispersion < 0 or self.order_noise < 0:
            raise SynthConfigError("noise parameters must be >= 0")
        if self.promo_demand_lift <= 0:
            raise SynthConfigError("promo_demand_lift must be positive")
        ids = set(self.product_ids)
        for a, b, s in self.substitution_pairs:
            if a not in ids or b not in ids or a == b:
                raise SynthConfigError(f"bad substitution pair {a}/{b}")
            if not 0 <= s <= 1:
                raise SynthConfigError("substitution strength must lie in [0, 1]")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise SynthConfigError(f"bad start_date {self.start_date!r}") from None

    @property
    def product_ids(self) -> list[str]:
        return [f"P{i:03d}" for i in range(self.n_products)]

    @property
    def warehouse_ids(self) -> list[str]:
        return [f"W{i:02d}" for i in range(self.n_warehouses)]

    @property
    def start(self) -> dt.date:
        return dt.date.fromisoformat(self.start_date)

    @property
    def end(self) -> dt.date:
        return self.start + relativedelta(months=self.months) - dt.timedelta(days=1)

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise SynthConfigError(f"unknown settings: {sorted(unknown)}")
        try:
            return cls(**values)
        except (TypeError, ValueError) as exc:
            raise SynthConfigError(str(exc)) from None


def german_holidays(years) -> set[dt.date]:
    """Nationwide German public holidays."""
    out = set()
    for y in years:
        e = easter(y)
        out.update({
            dt.date(y, 1, 1), e - dt.timedelta(days=2), e + dt.timedelta(days=1), dt.date(y, 5, 1),
            e + dt.timedelta(days=39), e + dt.timedelta(days=50), dt.date(y, 10, 3),
            dt.date(y, 12, 25), dt.date(y, 12, 26),
        })
    return out


@dataclass
class SynthDataset:
    records: list[SalesRecord]
    holidays: list[dt.date]
    products: list[tuple[str, str, float]]  # (product_id, category, base_demand)
    calendar: StoreCalendar


def _noise(rng: np.random.Generator, dispersion: float, size) -> np.ndarray:
    if dispersion == 0:
        return np.ones(size)
    shape = 1.0 / dispersion**2
    return rng.gamma(shape, dispersion**2, size=size)


def generate_dataset(config: SynthConfig) -> SynthDataset:
    rng = np.random.default_rng(config.seed)
    start, end = config.start, config.end
    holidays = sorted(d for d in german_holidays(range(start.year, end.year + 1)) if start <= d <= end)
    cal = StoreCalendar.from_range(start, end, holidays)
    days = cal.open_days
    n_days = len(days)
    weekday = np.array([d.weekday() for d in days])
    doy = np.array([d.timetuple().tm_yday for d in days])
    profile = np.array(config.weekly_profile)[weekday]
    yearly = 1.0 + config.yearly_amplitude * np.sin(2 * np.pi * doy / 365.0)

    pids = config.product_ids
    n_bev = int(round(config.beverage_fraction * config.n_products))
    categories = ["food"] * (config.n_products - n_bev) + ["beverages"] * n_bev
    if config.base_demand:
        base = np.array(config.base_demand)
    else:
        base = np.where(
            np.array(categories) == "beverages",
            rng.uniform(80, 200, config.n_products),
            rng.uniform(10, 60, config.n_products),
        ).round(1)
    prices = rng.uniform(0.5, 5.0, config.n_products).round(2)
    # beverages react more strongly to promotions
    lift = np.where(np.array(categories) == "beverages", config.promo_demand_lift * 1.3, config.promo_demand_lift)
    promo = rng.random((config.n_products, n_days)) < config.promo_probability
    wh_scale = 1.0 + config.warehouse_spread * rng.uniform(-1, 1, config.n_warehouses)
    wh_scale[0] = 1.0

    index = {p: i for i, p in enumerate(pids)}
    seasonal = profile * yearly
    records = []
    for w, wid in enumerate(config.warehouse_ids):
        mu = base[:, None] * wh_scale[w] * seasonal[None, :] * np.where(promo, lift[:, None], 1.0)
        shifted = mu.copy()
        for a, b, s in config.substitution_pairs:
            ia, ib = index[a], index[b]
            active = promo[ia] & ~promo[ib]
            moved = s * mu[ib] * active
            shifted[ib] -= moved
            shifted[ia] += moved
        noise = _noise(rng, config.noise_dispersion, shifted.shape)
        demand = np.rint(shifted * noise)
        order_eps = rng.normal(0.0, 1.0, shifted.shape) * config.order_noise * shifted
        known = np.maximum(0.0, config.known_orders_fraction * demand + order_eps).round(2)
        missing = rng.random(shifted.shape) < config.price_missing_probability
        for i, pid in enumerate(pids):
            for t, d in enumerate(days):
                price = None if missing[i, t] else round(float(prices[i] * (1 - config.promo_price_drop * promo[i, t])), 2)
                records.append(SalesRecord(
                    d, ProductId(pid), WarehouseId(wid), float(demand[i, t]), price,
                    bool(promo[i, t]), float(known[i, t]),
                ))
    products = [(pid, categories[i], float(base[i])) for i, pid in enumerate(pids)]
    return SynthDataset(records, holidays, products, cal)


def write_dataset(ds: SynthDataset, out_dir, comment: str | None = None) -> dict[str, Path]:
    """Write sales, holiday and product files; ``comment`` becomes a leading ``#`` line in each."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"sales": out / "sales.csv", "holidays": out / "holidays.csv", "products": out / "products.csv"}
    top = f"# {comment}\n" if comment else ""
    write_sales_csv(paths["sales"], ds.records, comment)
    with open(paths["holidays"], "w", newline="", encoding="utf-8") as fh:
        fh.write(top + "date\n")
        for d in ds.holidays:
            fh.write(d.isoformat() + "\n")
    with open(paths["products"], "w", newline="", encoding="utf-8") as fh:
        fh.write(top)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "category", "base_demand"])
        for pid, cat, b in ds.products:
            w.writerow([pid, cat, repr(b)])
    return paths


def generate(config: SynthConfig, out_dir, comment: str | None = None) -> dict[str, Path]:
    return write_dataset(generate_dataset(config), out_dir, comment)
