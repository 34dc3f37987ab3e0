"""Forecast error metrics, lookahead-resolved evaluation and report files."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import HORIZON


class MetricError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


def _pair(F, A) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=float)
    A = np.asarray(A, dtype=float)
    if F.shape != A.shape:
        raise MetricError(f"length mismatch {F.shape} vs {A.shape}")
    if F.size == 0:
        raise MetricError("empty input")
    return F, A


def mae(F, A) -> float:
    F, A = _pair(F, A)
    return float(np.mean(np.abs(F - A)))


def mmape(F, A) -> float:
    """Mean of |F - A| / (1 + |A|); finite at zero actual demand."""
    F, A = _pair(F, A)
    return float(np.mean(np.abs(F - A) / (1.0 + np.abs(A))))


@dataclass(frozen=True)
class LookaheadErrors:
    """MAE and mMAPE per lookahead over ``m`` forecast origins for one series."""

    mae: np.ndarray
    mmape: np.ndarray
    m: int

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae))

    @property
    def mean_mmape(self) -> float:
        return float(np.mean(self.mmape))


def lookahead_errors(forecasts, actuals, forecast_origins=None, actual_origins=None) -> LookaheadErrors:
    F = np.atleast_2d(np.asarray(forecasts, dtype=float))
    A = np.atleast_2d(np.asarray(actuals, dtype=float))
    if forecast_origins is not None and actual_origins is not None:
        if not np.array_equal(np.asarray(forecast_origins), np.asarray(actual_origins)):
            raise AlignmentError("forecast and actual origins differ")
    if F.shape != A.shape:
        raise AlignmentError(f"forecasts {F.shape} and actuals {A.shape} are not aligned")
    if F.shape[0] == 0:
        raise MetricError("no forecast origins")
    maes = np.array([mae(F[:, k], A[:, k]) for k in range(F.shape[1])])
    mmapes = np.array([mmape(F[:, k], A[:, k]) for k in range(F.shape[1])])
    return LookaheadErrors(maes, mmapes, F.shape[0])


def overall_means(rows: Iterable[LookaheadErrors]) -> tuple[float, float]:
    """Average over lookaheads first, then over products (both unweighted)."""
    rows = list(rows)
    if not rows:
        raise MetricError("no products to aggregate")
    return (
        float(np.mean([r.mean_mae for r in rows])),
        float(np.mean([r.mean_mmape for r in rows])),
    )


@dataclass(frozen=True)
class BoxPlotStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list = field(default_factory=list)


def boxplot_stats(values: Sequence[float], labels: Sequence[str] | None = None) -> BoxPlotStats:
    """Type-7 quartiles; whiskers at the furthest points within 1.5 IQR."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise MetricError("no values")
    labels = list(labels) if labels is not None else [str(i) for i in range(v.size)]
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = [(labels[i], float(v[i])) for i in range(v.size) if v[i] < lo_fence or v[i] > hi_fence]
    return BoxPlotStats(float(q1), float(med), float(q3), float(inside.min()), float(inside.max()), outliers)


@dataclass
class EvaluationReport:
    """Per-series lookahead errors for every model, keyed by (model, product_id)."""

    errors: dict[tuple[str, str], LookaheadErrors] = field(default_factory=dict)
    categories: dict[str, str] = field(default_factory=dict)

    def add(self, model: str, product: str, errs: LookaheadErrors, category: str | None = None) -> None:
        self.errors[(model, product)] = errs
        if category is not None:
            self.categories[product] = category

    @property
    def models(self) -> list[str]:
        return list(dict.fromkeys(m for m, _ in self.errors))

    def products(self, model: str, category: str | None = None) -> list[str]:
        return [
            p for (m, p) in self.errors
            if m == model and (category is None or self.categories.get(p, "all") == category)
        ]

    def category_list(self) -> list[str]:
        cats = sorted(set(self.categories.get(p, "all") for _, p in self.errors))
        return cats

    def overall(self, model: str, category: str | None = None) -> tuple[float, float]:
        return overall_means(self.errors[(model, p)] for p in self.products(model, category))

    def summary_rows(self) -> list[tuple[str, str, float, float]]:
        out = []
        for model in self.models:
            for cat in self.category_list():
                if self.products(model, cat):
                    out.append((model, cat, *self.overall(model, cat)))
        return out

    def boxplot(self, model: str, category: str | None = None) -> BoxPlotStats:
        prods = self.products(model, category)
        return boxplot_stats([self.errors[(model, p)].mean_mmape for p in prods], prods)


def _f(x: float) -> str:
    return repr(float(x))


def write_evaluation_csv(path, report: EvaluationReport, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "category", "model", "lookahead", "mae", "mmape"])
        for (model, product), errs in report.errors.items():
            cat = report.categories.get(product, "all")
            for k in range(len(errs.mae)):
                w.writerow([product, cat, model, k + 1, _f(errs.mae[k]), _f(errs.mmape[k])])


def write_summary_csv(path, report: EvaluationReport, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "category", "overall_mean_mae", "mean_mmape"])
        for model, cat, m_mae, m_mmape in report.summary_rows():
            w.writerow([model, cat, _f(m_mae), _f(m_mmape)])


def write_boxplot_csv(path, report: EvaluationReport, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "category", "q1", "median", "q3", "whisker_low", "whisker_high", "outliers"])
        for model in report.models:
            for cat in report.category_list():
                if not report.products(model, cat):
                    continue
                s = report.boxplot(model, cat)
                outl = ";".join(f"{p}:{v!r}" for p, v in s.outliers)
                w.writerow([model, cat, _f(s.q1), _f(s.median), _f(s.q3), _f(s.whisker_low), _f(s.whisker_high), outl])


def plot_report(report: EvaluationReport, out_dir, prefix: str = "comparison") -> list[Path]:
    """One SVG per category: overall-mean bars for both metrics plus mMAPE box plots."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "lstm-demand"
    out_dir = Path(out_dir)
    paths = []
    for cat in report.category_list():
        models = [m for m in report.models if report.products(m, cat)]
        if not models:
            continue
        means = [report.overall(m, cat) for m in models]
        fig, axes = plt.subplots(1, 3, figsize=(13, 4))
        axes[0].bar(models, [m[0] for m in means], color="tab:blue")
        axes[0].set_title("overall mean MAE")
        axes[1].bar(models, [m[1] for m in means], color="tab:orange")
        axes[1].set_title("mean mMAPE")
        data = [[report.errors[(m, p)].mean_mmape for p in report.products(m, cat)] for m in models]
        axes[2].boxplot(data, whis=1.5)
        axes[2].set_xticks(range(1, len(models) + 1), models)
        axes[2].set_title("product mean mMAPE")
        for ax in axes:
            ax.tick_params(axis="x", labelrotation=45)
        fig.suptitle(f"{prefix}: {cat}")
        fig.tight_layout()
        path = out_dir / f"{prefix}_{cat}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
