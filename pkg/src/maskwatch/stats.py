"""Statistical kernel: distribution functions, correlations with lag search,
Mann-Kendall trend test, Welch's t-test.

All p-values are two-sided. Nothing here depends on scipy; the t CDF is
evaluated through the regularized incomplete beta function (continued
fraction), and the normal CDF through the C library's erfc.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence, Union

import numpy as np

from .errors import (
    ConvergenceError,
    InsufficientDataError,
    ShapeMismatchError,
    ZeroVarianceError,
)

if TYPE_CHECKING:
    from .aggregate import MetricSeries
    from .records import CaseSeries

_BETA_EPS = 1e-12
_BETA_MAX_ITER = 300
_FPMIN = 1e-300

PEARSON = "pearson"
SPEARMAN = "spearman"


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _BETA_EPS:
            return h
    raise ConvergenceError(
        f"incomplete beta did not converge in {_BETA_MAX_ITER} iterations "
        f"(a={a}, b={b}, x={x})"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), evaluated on whichever side of the symmetry converges."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """CDF of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if not math.isfinite(t):
        return 0.0 if t < 0 else 1.0
    x = df / (df + t * t)
    half_tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - half_tail if t >= 0 else half_tail


def _two_sided_t_pvalue(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_cdf(-abs(t), df))


@dataclass(frozen=True)
class CorrelationResult:
    method: str
    lag: int
    r: float
    n: int
    p: float


@dataclass(frozen=True)
class TrendResult:
    s_statistic: int
    variance: float
    z: float
    p: float


@dataclass(frozen=True)
class SampleSummary:
    """Sufficient statistics of one sample: size, mean, sample sd (ddof=1)."""

    n: int
    mean: float
    sd: float

    def __post_init__(self):
        if self.n < 2:
            raise InsufficientDataError(f"need n >= 2, got {self.n}")
        if self.sd < 0:
            raise ValueError("sd must be non-negative")


@dataclass(frozen=True)
class WelchResult:
    mean_before: float
    mean_after: float
    sd_before: float
    sd_after: float
    n_before: int
    n_after: int
    t: float
    df: float
    p: float


def _as_array(values: Sequence[float], name: str) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return a


def _pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    xd = x - x.mean()
    yd = y - y.mean()
    sxx = float(np.dot(xd, xd))
    syy = float(np.dot(yd, yd))
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVarianceError("correlation undefined for a constant series")
    r = float(np.dot(xd, yd)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _corr_pvalue(r: float, n: int) -> float:
    if 1.0 - r * r <= 0.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return _two_sided_t_pvalue(t, n - 2)


def pearson(x: Sequence[float], y: Sequence[float], lag: int = 0) -> CorrelationResult:
    """Sample Pearson correlation with a Student-t two-sided p-value."""
    xa = _as_array(x, "x")
    ya = _as_array(y, "y")
    if len(xa) != len(ya):
        raise ShapeMismatchError(f"series lengths differ: {len(xa)} vs {len(ya)}")
    n = len(xa)
    if n < 3:
        raise InsufficientDataError(f"need n >= 3, got {n}")
    r = _pearson_r(xa, ya)
    return CorrelationResult(PEARSON, lag, r, n, _corr_pvalue(r, n))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the average of their ranks."""
    a = _as_array(values, "values")
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    boundaries = np.flatnonzero(
        np.r_[True, sorted_a[1:] != sorted_a[:-1], True]
    )
    run_lengths = np.diff(boundaries)
    # average of 1-based positions b+1 .. e for a run over [b, e)
    run_means = (boundaries[:-1] + boundaries[1:] + 1) / 2.0
    ranks = np.empty(len(a), dtype=np.float64)
    ranks[order] = np.repeat(run_means, run_lengths)
    return ranks


def spearman(x: Sequence[float], y: Sequence[float], lag: int = 0) -> CorrelationResult:
    """Spearman rank correlation: Pearson on average ranks."""
    xa = _as_array(x, "x")
    ya = _as_array(y, "y")
    if len(xa) != len(ya):
        raise ShapeMismatchError(f"series lengths differ: {len(xa)} vs {len(ya)}")
    n = len(xa)
    if n < 3:
        raise InsufficientDataError(f"need n >= 3, got {n}")
    r = _pearson_r(average_ranks(xa), average_ranks(ya))
    return CorrelationResult(SPEARMAN, lag, r, n, _corr_pvalue(r, n))


_CORR_FUNCS = {PEARSON: pearson, SPEARMAN: spearman}


def lag_max_correlation(
    cases: "CaseSeries",
    pct: "MetricSeries",
    lags: Iterable[int],
    method: str = PEARSON,
) -> CorrelationResult:
    """Correlate pct[t] with cases[t - k] over the overlap, for each lag k,
    and return the lag with the highest r (ties break to the smallest lag).

    The p-value of the winning lag is not corrected for the lag search.
    """
    if method not in _CORR_FUNCS:
        raise ValueError(f"unknown correlation method {method!r}")
    lag_list = sorted(set(int(k) for k in lags))
    if not lag_list:
        raise ValueError("no lags given")
    case_values = {d: float(c) for d, c in cases.entries}
    defined = [(d, v) for d, v in pct.points if v is not None]

    def aligned(k: int) -> tuple[list[float], list[float]]:
        shift = datetime.timedelta(days=k)
        xs, ys = [], []
        for d, v in defined:
            c = case_values.get(d - shift)
            if c is not None:
                ys.append(v)
                xs.append(c)
        return xs, ys

    max_lag = lag_list[-1]
    if len(aligned(max_lag)[0]) < 10:
        raise InsufficientDataError(
            f"fewer than 10 overlapping points at lag {max_lag}"
        )
    best: CorrelationResult | None = None
    for k in lag_list:
        xs, ys = aligned(k)
        result = _CORR_FUNCS[method](xs, ys, lag=k)
        if best is None or result.r > best.r:
            best = result
    assert best is not None
    return best


def mann_kendall(series: Sequence[float]) -> TrendResult:
    """Mann-Kendall trend test with tie-corrected variance and continuity
    correction; two-sided normal p-value."""
    x = _as_array(series, "series")
    n = len(x)
    if n < 8:
        raise InsufficientDataError(f"need n >= 8, got {n}")
    diffs = np.sign(x[np.newaxis, :] - x[:, np.newaxis])
    s = int(np.triu(diffs, k=1).sum())
    _, tie_counts = np.unique(x, return_counts=True)
    ties = tie_counts[tie_counts > 1].astype(np.float64)
    var_s = (
        n * (n - 1) * (2 * n + 5) - float((ties * (ties - 1) * (2 * ties + 5)).sum())
    ) / 18.0
    if var_s <= 0.0:  # every value tied
        return TrendResult(s, 0.0, 0.0, 1.0)
    if s > 0:
        z = (s - 1) / math.sqrt(var_s)
    elif s < 0:
        z = (s + 1) / math.sqrt(var_s)
    else:
        z = 0.0
    p = 2.0 * (1.0 - normal_cdf(abs(z)))
    return TrendResult(s, var_s, z, min(1.0, p))


Sample = Union[Sequence[float], SampleSummary]


def _summarize(sample: Sample, name: str) -> SampleSummary:
    if isinstance(sample, SampleSummary):
        return sample
    a = _as_array(sample, name)
    n = len(a)
    if n < 2:
        raise InsufficientDataError(f"{name} needs n >= 2, got {n}")
    mean = float(a.mean())
    sd = math.sqrt(float(((a - mean) ** 2).sum()) / (n - 1))
    return SampleSummary(n, mean, sd)


def welch(before: Sample, after: Sample) -> WelchResult:
    """Welch's unequal-variance t-test; positive t means the 'after' mean is
    higher. Degrees of freedom via Welch-Satterthwaite."""
    b = _summarize(before, "before")
    a = _summarize(after, "after")
    vb = b.sd * b.sd / b.n
    va = a.sd * a.sd / a.n
    if va + vb == 0.0:
        raise ZeroVarianceError("both samples have zero variance")
    t = (a.mean - b.mean) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va * va / (a.n - 1) + vb * vb / (b.n - 1))
    p = _two_sided_t_pvalue(t, df)
    return WelchResult(
        mean_before=b.mean,
        mean_after=a.mean,
        sd_before=b.sd,
        sd_after=a.sd,
        n_before=b.n,
        n_after=a.n,
        t=t,
        df=df,
        p=p,
    )
