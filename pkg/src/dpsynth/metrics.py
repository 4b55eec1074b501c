"""Distribution-distance metrics and downstream-task efficacy.

Binned metrics share one equal-width grid fitted on the reference (test)
table with 0.5% padding per side; out-of-range values are clamped into the
edge bins. The two-way total-variation headline number is the mean over
column pairs (the summed variant is reported alongside, since it grows with
the pair count). Jensen-Shannon is summed over columns in natural log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import MetricError, ShapeError, UsageError
from .tabular import Table

DEFAULT_BINS = 20
_PAD = 0.005
RIDGE_LAMBDA = 1e-3


def _values(x) -> np.ndarray:
    v = x.values if isinstance(x, Table) else np.asarray(x, dtype=np.float64)
    return np.asarray(v, dtype=np.float64)


def _matrix_pair(a, b):
    A, B = _values(a), _values(b)
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError("expected 2-D tables")
    if A.shape[1] != B.shape[1]:
        raise UsageError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    if isinstance(a, Table) and isinstance(b, Table) and a.names != b.names:
        raise UsageError(f"column names differ: {a.names} vs {b.names}")
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise UsageError("empty table")
    return A, B


# ---------------------------------------------------------------------------
# Wasserstein


def wd_1d(a, b) -> float:
    """Empirical 1-Wasserstein distance between two samples.

    Both samples are read off at m = max(len(a), len(b)) quantile positions
    (i + 0.5) / m using the inverse empirical CDF, and the absolute
    differences are averaged. For equal sizes this is exactly the mean
    absolute difference of the sorted samples.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise UsageError("wd_1d needs non-empty samples")
    m = max(a.size, b.size)
    ps = (np.arange(m) + 0.5) / m
    qa = a[np.minimum((ps * a.size).astype(np.intp), a.size - 1)]
    qb = b[np.minimum((ps * b.size).astype(np.intp), b.size - 1)]
    return float(np.abs(qa - qb).mean())


def wd_table(a, b) -> float:
    """Mean of wd_1d over columns."""
    A, B = _matrix_pair(a, b)
    return float(np.mean([wd_1d(A[:, j], B[:, j]) for j in range(A.shape[1])]))


# ---------------------------------------------------------------------------
# binned metrics


@dataclass
class BinGrid:
    """Per-column equal-width bin ranges shared by both samples."""

    lo: np.ndarray
    hi: np.ndarray
    bins: int = DEFAULT_BINS

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ShapeError("lo/hi must be matching 1-D arrays")
        if np.any(self.hi <= self.lo):
            raise UsageError("each hi must exceed its lo")
        if self.bins < 2:
            raise UsageError(f"bins must be >= 2, got {self.bins}")

    @property
    def d(self) -> int:
        return self.lo.size


def fit_grid(reference, bins: int = DEFAULT_BINS) -> BinGrid:
    """Column ranges from the reference table, padded by 0.5% of the range
    per side (constant columns get a half-unit pad so the grid stays valid)."""
    R = _values(reference)
    if R.ndim != 2 or R.shape[0] == 0:
        raise UsageError("reference must be a non-empty 2-D table")
    lo = R.min(axis=0)
    hi = R.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, _PAD * span, 0.5)
    return BinGrid(lo - pad, hi + pad, bins)


def bin_indices(grid: BinGrid, X) -> np.ndarray:
    """Bin index per cell; values outside the range land in the edge bins."""
    X = _values(X)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != grid.d:
        raise UsageError(f"grid covers {grid.d} columns, table has {X.shape[1]}")
    width = (grid.hi - grid.lo) / grid.bins
    idx = np.floor((X - grid.lo) / width).astype(np.intp)
    return np.clip(idx, 0, grid.bins - 1)


def _hist_1d(idx_col: np.ndarray, bins: int) -> np.ndarray:
    return np.bincount(idx_col, minlength=bins) / idx_col.size


def _hist_2d(idx_i: np.ndarray, idx_j: np.ndarray, bins: int) -> np.ndarray:
    flat = idx_i * bins + idx_j
    return np.bincount(flat, minlength=bins * bins).reshape(bins, bins) / idx_i.size


def tvd_1way(a, b, grid: BinGrid | None = None, bins: int = DEFAULT_BINS) -> float:
    """Mean over columns of the total variation between binned marginals."""
    A, B = _matrix_pair(a, b)
    grid = grid or fit_grid(b, bins)
    ia, ib = bin_indices(grid, A), bin_indices(grid, B)
    vals = [
        0.5 * np.abs(_hist_1d(ia[:, j], grid.bins) - _hist_1d(ib[:, j], grid.bins)).sum()
        for j in range(A.shape[1])
    ]
    return float(np.mean(vals))


def tvd_2way(a, b, grid: BinGrid | None = None, bins: int = DEFAULT_BINS):
    """Total variation between binned pairwise marginals.

    Returns (mean, sum) over the C(d, 2) column pairs; the mean is the
    headline value.
    """
    A, B = _matrix_pair(a, b)
    d = A.shape[1]
    if d < 2:
        raise UsageError("tvd_2way needs at least two columns")
    grid = grid or fit_grid(b, bins)
    ia, ib = bin_indices(grid, A), bin_indices(grid, B)
    vals = []
    for i in range(d):
        for j in range(i + 1, d):
            pa = _hist_2d(ia[:, i], ia[:, j], grid.bins)
            pb = _hist_2d(ib[:, i], ib[:, j], grid.bins)
            vals.append(0.5 * np.abs(pa - pb).sum())
    return float(np.mean(vals)), float(np.sum(vals))


def js_divergence(a, b, grid: BinGrid | None = None, bins: int = DEFAULT_BINS) -> float:
    """Sum over columns of the Jensen-Shannon divergence between binned
    marginals, in nats (each column contributes at most ln 2)."""
    A, B = _matrix_pair(a, b)
    grid = grid or fit_grid(b, bins)
    ia, ib = bin_indices(grid, A), bin_indices(grid, B)
    total = 0.0
    for j in range(A.shape[1]):
        p = _hist_1d(ia[:, j], grid.bins)
        q = _hist_1d(ib[:, j], grid.bins)
        m = 0.5 * (p + q)
        total += 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    return float(total)


def _kl(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / m[mask])))


# ---------------------------------------------------------------------------
# MMD


def median_bandwidth(a, b) -> float:
    """Median pairwise Euclidean distance over the pooled rows."""
    A, B = _matrix_pair(a, b)
    pool = np.vstack([A, B])
    sq = ((pool[:, None, :] - pool[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(pool.shape[0], k=1)
    h = float(np.median(np.sqrt(sq[iu])))
    if h == 0.0:
        raise MetricError("median pairwise distance is zero; bandwidth undefined")
    return h


def mmd(a, b, bandwidth: float | None = None) -> float:
    """Unbiased squared maximum mean discrepancy with a Gaussian kernel
    exp(-|x - y|^2 / (2 h^2)); h defaults to the median heuristic on the
    pooled sample. The estimate is clamped at zero."""
    A, B = _matrix_pair(a, b)
    n, m = A.shape[0], B.shape[0]
    if n < 2 or m < 2:
        raise UsageError("unbiased MMD needs at least two rows per sample")
    h = median_bandwidth(A, B) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise MetricError(f"bandwidth must be positive, got {h}")
    gamma = 1.0 / (2.0 * h * h)

    def gram(X, Y):
        sq = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-gamma * sq)

    kxx = gram(A, A)
    kyy = gram(B, B)
    kxy = gram(A, B)
    term_x = (kxx.sum() - np.trace(kxx)) / (n * (n - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
    return float(max(0.0, term_x + term_y - 2.0 * kxy.mean()))


# ---------------------------------------------------------------------------
# downstream efficacy


def _feature_split(table: Table, target: str):
    t = table.column_index(target)
    keep = [j for j in range(table.d) if j != t]
    return table.values[:, keep], table.values[:, t]


def ridge_fit_predict(X_train, y_train, X_test, lam: float = RIDGE_LAMBDA) -> np.ndarray:
    """Closed-form ridge with an unpenalized intercept (centered solve)."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    xm = X_train.mean(axis=0)
    ym = y_train.mean()
    Xc = X_train - xm
    beta = np.linalg.solve(Xc.T @ Xc + lam * np.eye(Xc.shape[1]), Xc.T @ (y_train - ym))
    return (np.asarray(X_test, dtype=np.float64) - xm) @ beta + ym


def mlp_fit_predict(
    X_train,
    y_train,
    X_test,
    hidden: int = 16,
    iters: int = 500,
    lr: float = 0.05,
    seed: int = 0,
) -> np.ndarray:
    """Small one-hidden-layer regressor on standardized features/target,
    trained full-batch; deterministic for a fixed seed."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    xm, xs = X_train.mean(axis=0), X_train.std(axis=0)
    xs = np.where(xs > 0, xs, 1.0)
    ym, ys = y_train.mean(), y_train.std()
    ys = ys if ys > 0 else 1.0
    Xs = (X_train - xm) / xs
    yn = (y_train - ym) / ys
    rng = np.random.default_rng(seed)
    l1 = nn.init_dense(hidden, Xs.shape[1], rng, activation=nn.LEAKY_RELU)
    l2 = nn.init_dense(1, hidden, rng)
    n = Xs.shape[0]
    for _ in range(iters):
        pre1 = Xs @ l1.weight.T + l1.bias
        h = nn.leaky_relu(pre1, l1.slope)
        pred = h @ l2.weight[0] + l2.bias[0]
        err = (pred - yn) / n
        dw2 = err @ h
        db2 = err.sum()
        dh = np.outer(err, l2.weight[0]) * nn.leaky_relu_grad(pre1, l1.slope)
        dw1 = dh.T @ Xs
        db1 = dh.sum(axis=0)
        l2.weight[0] -= lr * dw2
        l2.bias[0] -= lr * db2
        l1.weight -= lr * dw1
        l1.bias -= lr * db1
    if not (np.all(np.isfinite(l1.weight)) and np.all(np.isfinite(l2.weight))):
        raise MetricError("downstream regressor diverged")
    Xt = (np.asarray(X_test, dtype=np.float64) - xm) / xs
    h = nn.leaky_relu(Xt @ l1.weight.T + l1.bias, l1.slope)
    return (h @ l2.weight[0] + l2.bias[0]) * ys + ym


def downstream_efficacy(train: Table, test: Table, target: str, model: str = "ridge", seed: int = 0) -> dict:
    """Fit on (synthetic) train, score on (real) test; r2 and rmse are on the
    test target's original scale."""
    if train.names != test.names:
        raise UsageError("train/test column names differ")
    Xtr, ytr = _feature_split(train, target)
    Xte, yte = _feature_split(test, target)
    if model == "ridge":
        pred = ridge_fit_predict(Xtr, ytr, Xte)
    elif model == "small_mlp":
        pred = mlp_fit_predict(Xtr, ytr, Xte, seed=seed)
    else:
        raise UsageError(f"unknown downstream model {model!r}")
    resid = yte - pred
    ss_res = float((resid**2).sum())
    ss_tot = float(((yte - yte.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise MetricError(f"test target {target!r} has zero variance; r2 undefined")
    r2 = 1.0 - ss_res / ss_tot
    rmse = float(np.sqrt((resid**2).mean()))
    return {"model": model, "r2": r2, "rmse": rmse}


# ---------------------------------------------------------------------------
# bundled report


@dataclass
class MetricReport:
    wd: float
    tvd_2way: float
    tvd_2way_sum: float
    tvd_1way: float
    mmd: float
    js: float
    downstream: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "wd": self.wd,
            "tvd_2way": self.tvd_2way,
            "tvd_2way_sum": self.tvd_2way_sum,
            "tvd_1way": self.tvd_1way,
            "mmd": self.mmd,
            "js": self.js,
            "downstream": self.downstream,
            "meta": self.meta,
        }


def metric_report(
    synthetic: Table,
    test: Table,
    bins: int = DEFAULT_BINS,
    bandwidth: float | None = None,
    target: str | None = None,
    models=("ridge",),
    seed: int = 0,
) -> MetricReport:
    """All metrics of the synthetic table against the held-out table."""
    grid = fit_grid(test, bins)
    mean2, sum2 = (
        tvd_2way(synthetic, test, grid) if test.d >= 2 else (math.nan, math.nan)
    )
    used_bandwidth = bandwidth if bandwidth is not None else median_bandwidth(synthetic, test)
    report = MetricReport(
        wd=wd_table(synthetic, test),
        tvd_2way=mean2,
        tvd_2way_sum=sum2,
        tvd_1way=tvd_1way(synthetic, test, grid),
        mmd=mmd(synthetic, test, used_bandwidth),
        js=js_divergence(synthetic, test, grid),
        meta={
            "bins": bins,
            "bandwidth": used_bandwidth,
            "n_synthetic": synthetic.n,
            "n_test": test.n,
            "tvd_headline": "mean over pairs",
        },
    )
    if target is not None:
        for model in models:
            report.downstream.append(downstream_efficacy(synthetic, test, target, model, seed))
    return report
