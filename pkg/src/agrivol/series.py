"""Calendar-aware monthly time series.

Core container (`MonthlySeries`) plus the elementary operations the rest of
the package builds on: log-returns, trailing/centered rolling statistics,
envelope bands, centered smoothing, OLS trend slopes and the Mann-Kendall
monotone trend test.

All functions are pure: they never mutate their inputs and hold no state.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DataError

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True, order=True)
class MonthStamp:
    """A specific calendar month, totally ordered by (year, month)."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def plus(self, months: int) -> "MonthStamp":
        idx = self.year * 12 + (self.month - 1) + months
        return MonthStamp(idx // 12, idx % 12 + 1)

    def months_since(self, other: "MonthStamp") -> int:
        return (self.year - other.year) * 12 + (self.month - other.month)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(eq=False)
class MonthlySeries:
    """Contiguous monthly observations starting at `start`.

    Values are stored as a float ndarray; treat it as immutable. The unit
    label is carried through elementwise transforms by the callers.
    """

    start: MonthStamp
    values: np.ndarray
    unit: str = "dimensionless"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if vals.size < 1:
            raise ValueError("a MonthlySeries needs at least one value")
        self.values = vals

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> MonthStamp:
        return self.start.plus(len(self) - 1)

    def months(self) -> list[MonthStamp]:
        return [self.start.plus(i) for i in range(len(self))]

    def stamp_at(self, i: int) -> MonthStamp:
        if not 0 <= i < len(self):
            raise IndexError(f"index {i} outside series of length {len(self)}")
        return self.start.plus(i)

    def index_of(self, stamp: MonthStamp) -> int:
        i = stamp.months_since(self.start)
        if not 0 <= i < len(self):
            raise KeyError(f"{stamp} outside series range {self.start}..{self.end}")
        return i

    def at(self, stamp: MonthStamp) -> float:
        return float(self.values[self.index_of(stamp)])

    def slice_range(self, first: MonthStamp, last: MonthStamp) -> "MonthlySeries":
        """Sub-series covering first..last inclusive; both must lie inside."""
        i, j = self.index_of(first), self.index_of(last)
        if j < i:
            raise ValueError(f"empty range {first}..{last}")
        return MonthlySeries(first, self.values[i : j + 1].copy(), self.unit)

    def same_calendar(self, other: "MonthlySeries") -> bool:
        return self.start == other.start and len(self) == len(other)


@dataclass(frozen=True)
class TrendResult:
    """Mann-Kendall trend test outcome."""

    s_statistic: int
    variance_s: float
    z_score: float
    p_value: float
    direction: str  # "increasing" | "decreasing" | "none"


@dataclass(eq=False)
class BandSeries:
    """A center line with lower/upper envelopes on a shared calendar."""

    center: MonthlySeries
    lower: MonthlySeries
    upper: MonthlySeries
    window: int
    width_rule: str  # "k-sigma" | "log-sigma-factor"

    def __post_init__(self):
        if not (self.center.same_calendar(self.lower) and self.center.same_calendar(self.upper)):
            raise ValueError("band components must share the calendar")


def log_returns(prices: MonthlySeries) -> MonthlySeries:
    """Month-over-month log-returns: ln(p_t) - ln(p_{t-1}).

    Output is one shorter than the input and starts a month later.
    """
    if len(prices) < 2:
        raise DataError("need at least 2 prices to compute returns")
    bad = np.flatnonzero(prices.values <= 0)
    if bad.size:
        raise DataError(f"non-positive price at {prices.stamp_at(int(bad[0]))}")
    vals = np.diff(np.log(prices.values))
    return MonthlySeries(prices.start.plus(1), vals, unit="dimensionless")


def _windows(values: np.ndarray, window: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(values, window)


def rolling_mean_std(
    series: MonthlySeries, window: int
) -> tuple[MonthlySeries, MonthlySeries]:
    """Trailing rolling mean and sample (n-1) standard deviation.

    The first output point is stamped at month index window-1 of the input.
    """
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if len(series) < window:
        raise DataError(f"window {window} exceeds series length {len(series)}")
    w = _windows(series.values, window)
    means = w.mean(axis=1)
    stds = w.std(axis=1, ddof=1)
    start = series.start.plus(window - 1)
    return (
        MonthlySeries(start, means, series.unit),
        MonthlySeries(start, stds, series.unit),
    )


def band(
    series: MonthlySeries,
    window: int,
    rule: str = "k-sigma",
    k: float = 2.0,
    align: str = "trailing",
) -> BandSeries:
    """Rolling envelope band around the rolling mean.

    rule "k-sigma": bounds = mean +/- k*std. rule "log-sigma-factor":
    bounds = mean * exp(+/- k*std_of_log) (requires positive values).
    `align` is "trailing" (stamp at window end) or "centered".
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if rule not in ("k-sigma", "log-sigma-factor"):
        raise ValueError(f"unknown band rule {rule!r}")
    if align not in ("trailing", "centered"):
        raise ValueError(f"unknown alignment {align!r}")
    if len(series) < window:
        raise DataError(f"window {window} exceeds series length {len(series)}")

    w = _windows(series.values, window)
    center = w.mean(axis=1)
    if rule == "k-sigma":
        spread = k * w.std(axis=1, ddof=1)
        lower, upper = center - spread, center + spread
    else:
        bad = np.flatnonzero(series.values <= 0)
        if bad.size:
            raise DataError(
                f"log-sigma-factor band needs positive values; "
                f"offending month {series.stamp_at(int(bad[0]))}"
            )
        log_std = _windows(np.log(series.values), window).std(axis=1, ddof=1)
        factor = np.exp(k * log_std)
        lower, upper = center / factor, center * factor

    offset = window - 1 if align == "trailing" else window // 2
    start = series.start.plus(offset)
    return BandSeries(
        center=MonthlySeries(start, center, series.unit),
        lower=MonthlySeries(start, lower, series.unit),
        upper=MonthlySeries(start, upper, series.unit),
        window=window,
        width_rule=rule,
    )


def mann_kendall(series: MonthlySeries, alpha: float = 0.05) -> TrendResult:
    """Mann-Kendall monotone trend test with tie-corrected variance.

    S = sum over i<j of sgn(x_j - x_i); Var(S) uses the standard tie
    correction; the z-score applies the +/-1 continuity correction; the
    p-value is two-sided normal.
    """
    x = series.values
    n = x.size
    if n < 4:
        raise DataError(f"Mann-Kendall needs at least 4 points, got {n}")

    signs = np.sign(x[None, :] - x[:, None])
    s = int(np.triu(signs, k=1).sum())

    _, counts = np.unique(x, return_counts=True)
    ties = counts[counts > 1]
    tie_term = float(np.sum(ties * (ties - 1) * (2 * ties + 5)))
    var_s = (n * (n - 1) * (2 * n + 5) - tie_term) / 18.0

    if s > 0:
        z = (s - 1) / math.sqrt(var_s)
    elif s < 0:
        z = (s + 1) / math.sqrt(var_s)
    else:
        z = 0.0
    p = math.erfc(abs(z) / math.sqrt(2.0))  # two-sided

    if p < alpha:
        direction = "increasing" if z > 0 else "decreasing"
    else:
        direction = "none"
    return TrendResult(s, var_s, z, p, direction)


def ols_trend(series: MonthlySeries) -> tuple[float, float]:
    """Ordinary least squares of values on the time index 0..n-1.

    Returns (slope per month, intercept).
    """
    n = len(series)
    if n < 2:
        raise DataError("OLS trend needs at least 2 points")
    t = np.arange(n, dtype=float)
    slope, intercept = np.polyfit(t, series.values, 1)
    return float(slope), float(intercept)


def smooth(series: MonthlySeries, window: int) -> MonthlySeries:
    """Centered moving average with shrinking symmetric edge windows.

    Window must be odd; output has the same length and calendar as the
    input. Window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    x = series.values
    n = x.size
    half = window // 2
    out = np.empty(n)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    for i in range(n):
        h = min(half, i, n - 1 - i)
        out[i] = (csum[i + h + 1] - csum[i - h]) / (2 * h + 1)
    return MonthlySeries(series.start, out, series.unit)
