"""The retailer's benchmark models: ETS, MPQ, MDPQ, lasso regression and random forest.

Demand-history baselines take ``history`` as the demand observed strictly
before the origin row, matching the information the LSTM sees through its
``prev_demand`` column.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import HORIZON

QUARTER_DAYS = 78  # 13 weeks x 6 working days
ETS_ALPHAS = tuple(round(0.05 * k, 2) for k in range(1, 20))
LASSO_LAMBDAS = (0.0,) + tuple(10.0**k for k in range(-4, 2))
MODEL_TAGS = ("ETS", "MPQ", "MDPQ", "LR", "RF")


class BaselineError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineForecast:
    model: str
    origin: int
    values: np.ndarray


def median(values) -> float:
    """Median with the mean-of-middle-two convention for even counts."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise BaselineError("median of empty window")
    mid = v.size // 2
    return float(v[mid]) if v.size % 2 else float((v[mid - 1] + v[mid]) / 2)


# -- exponential smoothing ---------------------------------------------------

def ses_levels(history, alpha: float) -> np.ndarray:
    """Level after each observation: l_0 = y_0, l_t = a*y_t + (1-a)*l_{t-1}."""
    y = np.asarray(history, dtype=float)
    if y.size == 0:
        raise BaselineError("empty history")
    levels = np.empty_like(y)
    level = y[0]
    for t, v in enumerate(y):
        level = alpha * v + (1 - alpha) * level
        levels[t] = level
    return levels


def ets_forecast(history, alpha: float, h: int = HORIZON) -> np.ndarray:
    if not 0 < alpha <= 1:
        raise BaselineError(f"alpha must be in (0, 1], got {alpha}")
    return np.full(h, ses_levels(history, alpha)[-1])


def select_ets_alpha(demand, origins: Sequence[int], h: int = HORIZON, alphas=ETS_ALPHAS) -> float:
    """Alpha minimizing the MSE of h-step forecasts issued at ``origins``.

    ``demand[o]`` is the demand of row o; the forecast at origin o uses
    ``demand[:o]`` and is scored against ``demand[o+1 : o+1+h]``.
    """
    y = np.asarray(demand, dtype=float)
    origins = np.asarray(origins, dtype=int)
    targets = np.stack([y[o + 1 : o + 1 + h] for o in origins])
    best, best_mse = alphas[0], np.inf
    for a in alphas:
        levels = ses_levels(y, a)
        fc = levels[origins - 1][:, None]
        mse = float(np.mean((targets - fc) ** 2))
        if mse < best_mse:
            best, best_mse = a, mse
    return best


# -- median previous quarter -------------------------------------------------

def mpq_forecast(history, h: int = HORIZON, window: int = QUARTER_DAYS) -> np.ndarray:
    y = np.asarray(history, dtype=float)[-window:]
    if y.size == 0:
        raise BaselineError("empty quarter window")
    return np.full(h, median(y))


def mdpq_forecast(history, history_weekdays, target_weekdays, window: int = QUARTER_DAYS) -> np.ndarray:
    """Per-lookahead median over quarter days sharing the target day's weekday.

    Weekdays absent from the window fall back to the MPQ value.
    """
    y = np.asarray(history, dtype=float)[-window:]
    wd = np.asarray(history_weekdays)[-window:]
    if y.size == 0:
        raise BaselineError("empty quarter window")
    fallback = median(y)
    out = np.empty(len(target_weekdays))
    for k, day in enumerate(target_weekdays):
        same = y[wd == day]
        out[k] = median(same) if same.size else fallback
    return out


# -- lasso -------------------------------------------------------------------

def soft_threshold(x: float, t: float) -> float:
    return math.copysign(max(abs(x) - t, 0.0), x)


def lasso_objective(X, y, beta, intercept, lam) -> float:
    r = y - X @ beta - intercept
    return float(r @ r / (2 * len(y)) + lam * np.abs(beta).sum())


@dataclass(frozen=True)
class LassoFit:
    coef: np.ndarray
    intercept: float
    sweeps: int


def lasso_fit(X, y, lam: float, tol: float = 1e-8, max_sweeps: int = 10_000,
              trace: Optional[list] = None, warm_start: Optional[np.ndarray] = None) -> LassoFit:
    """Cyclic coordinate descent on (1/2n)||y - Xb - b0||^2 + lam*||b||_1.

    Works on the covariance form so each coordinate update is O(p).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise BaselineError("non-finite design matrix")
    if lam < 0:
        raise BaselineError("lambda must be >= 0")
    n, p = X.shape
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    G = Xc.T @ Xc / n
    c = Xc.T @ yc / n
    diag = np.diag(G).copy()
    beta = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)
    Gb = G @ beta
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if diag[j] <= 0:
                continue
            old = beta[j]
            rho = c[j] - Gb[j] + diag[j] * old
            new = soft_threshold(rho, lam) / diag[j]
            if new != old:
                Gb += G[:, j] * (new - old)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if trace is not None:
            trace.append(lasso_objective(X, y, beta, ym - xm @ beta, lam))
        if max_delta < tol:
            break
    return LassoFit(beta, float(ym - xm @ beta), sweeps)


def lasso_predict(fit: LassoFit, x) -> np.ndarray:
    return np.asarray(x, dtype=float) @ fit.coef + fit.intercept


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 0, std, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


# -- CART / random forest ----------------------------------------------------

@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    score: float  # n_left*var_left + n_right*var_right


def best_split(X, y, features: Sequence[int], min_leaf: int = 1) -> Optional[Split]:
    """Exact best threshold over ``features`` minimizing the summed child variance.

    Children are weighted by size (sum of squared deviations), the usual
    CART criterion. Thresholds are midpoints between distinct sorted values;
    ties in score go to the earlier feature in ``features``.
    """
    features = np.asarray(features, dtype=int)
    n = len(y)
    if n < 2 or features.size == 0:
        return None
    cols = X[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = y[order]
    cs = np.cumsum(ys, axis=0)
    cs2 = np.cumsum(ys * ys, axis=0)
    nl = np.arange(1, n)[:, None]
    nr = n - nl
    sl, sl2 = cs[:-1], cs2[:-1]
    sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
    sse = (sl2 - sl * sl / nl) + (sr2 - sr * sr / nr)
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)
    i_best = np.argmin(sse, axis=0)
    scores = sse[i_best, np.arange(features.size)]
    j = int(np.argmin(scores))
    i = int(i_best[j])
    return Split(int(features[j]), float((xs[i, j] + xs[i + 1, j]) / 2), float(scores[j]))


class RegressionTree:
    """CART regression tree stored as flat arrays; leaves have feature -1."""

    def __init__(self, max_depth: int = 12, min_leaf_rows: int = 5, max_features: Optional[int] = None):
        self.max_depth = max_depth
        self.min_leaf_rows = min_leaf_rows
        self.max_features = max_features

    def fit(self, X, y, rng: np.random.Generator) -> "RegressionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        p = X.shape[1]
        k = self.max_features or p
        feat, thr, left, right, value = [], [], [], [], []

        def grow(idx, depth):
            node = len(feat)
            feat.append(-1); thr.append(0.0); left.append(-1); right.append(-1)
            yi = y[idx]
            value.append(float(yi.mean()))
            if depth >= self.max_depth or len(idx) <= self.min_leaf_rows or yi.max() == yi.min():
                return node
            cand = rng.permutation(p)[:k] if k < p else np.arange(p)
            Xi = X[idx]
            split = best_split(Xi, yi, cand)
            if split is None:
                return node
            mask = Xi[:, split.feature] <= split.threshold
            feat[node], thr[node] = split.feature, split.threshold
            left[node] = grow(idx[mask], depth + 1)
            right[node] = grow(idx[~mask], depth + 1)
            return node

        grow(np.arange(len(y)), 0)
        self.feature = np.array(feat)
        self.threshold = np.array(thr)
        self.left = np.array(left)
        self.right = np.array(right)
        self.value = np.array(value)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return self.value[node]


@dataclass
class RandomForest:
    trees: list

    def predict(self, X) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def rf_fit(X, y, n_trees: int = 100, rng: Optional[np.random.Generator] = None,
           max_depth: int = 12, min_leaf_rows: int = 5) -> RandomForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise BaselineError("empty training set")
    rng = rng if rng is not None else np.random.default_rng(0)
    n, p = X.shape
    m = math.ceil(p / 3)
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, n, size=n)
        trees.append(RegressionTree(max_depth, min_leaf_rows, m).fit(X[boot], y[boot], rng))
    return RandomForest(trees)


def rf_predict(forest: RandomForest, x) -> np.ndarray:
    return forest.predict(x)


# -- per-series benchmark driver --------------------------------------------

LAG_ROWS = 7


def regression_design(values: np.ndarray, columns: Sequence[str], origins) -> np.ndarray:
    """Tabular design for LR/RF: the last LAG_ROWS prev_demand values plus the origin row's other features."""
    origins = np.asarray(origins, dtype=int)
    pd_col = list(columns).index("prev_demand")
    lags = np.stack([values[origins - k, pd_col] for k in range(LAG_ROWS)], axis=1)
    # dow_mon is the reference level: a full one-hot is collinear with the intercept
    others = [i for i, c in enumerate(columns) if c not in ("prev_demand", "dow_mon")]
    return np.hstack([lags, values[origins][:, others]])


def direct_targets(demand, origins, h: int = HORIZON) -> np.ndarray:
    y = np.asarray(demand, dtype=float)
    return np.stack([y[o + 1 : o + 1 + h] for o in np.asarray(origins, dtype=int)])


def fit_lasso_direct(X_train, Y_train, X_val, Y_val, lambdas=LASSO_LAMBDAS):
    """One lasso per lookahead with lambda picked on validation MSE."""
    std = Standardizer.fit(X_train)
    Xt, Xv = std.transform(X_train), std.transform(X_val)
    fits = []
    path = sorted(lambdas, reverse=True)
    for k in range(Y_train.shape[1]):
        best, best_mse = None, np.inf
        beta = None
        for lam in path:
            fit = lasso_fit(Xt, Y_train[:, k], lam, warm_start=beta)
            beta = fit.coef
            mse = float(np.mean((lasso_predict(fit, Xv) - Y_val[:, k]) ** 2))
            if mse < best_mse:
                best, best_mse = fit, mse
        fits.append(best)
    return std, fits


def predict_lasso_direct(model, X) -> np.ndarray:
    std, fits = model
    Xs = std.transform(X)
    return np.column_stack([lasso_predict(f, Xs) for f in fits])


def fit_rf_direct(X_train, Y_train, rng: np.random.Generator, n_trees: int = 100):
    return [rf_fit(X_train, Y_train[:, k], n_trees, rng) for k in range(Y_train.shape[1])]


def predict_rf_direct(forests, X) -> np.ndarray:
    return np.column_stack([f.predict(X) for f in forests])


def weekday_of(dates: Sequence[dt.date]) -> np.ndarray:
    return np.array([d.weekday() for d in dates])
