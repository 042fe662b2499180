"""Series container, returns, rolling statistics, bands, smoothing, trends."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agrivol.errors import DataError
from agrivol.series import (
    MonthStamp,
    band,
    log_returns,
    mann_kendall,
    ols_trend,
    rolling_mean_std,
    smooth,
)

from conftest import series


class TestMonthStamp:
    def test_ordering_and_successor(self):
        assert MonthStamp(2001, 12) < MonthStamp(2002, 1)
        assert MonthStamp(2001, 12).plus(1) == MonthStamp(2002, 1)
        assert MonthStamp(2002, 1).plus(-1) == MonthStamp(2001, 12)

    def test_parse_roundtrip(self):
        assert MonthStamp.parse("2001-10") == MonthStamp(2001, 10)
        assert str(MonthStamp(2001, 3)) == "2001-03"

    def test_invalid(self):
        with pytest.raises(ValueError):
            MonthStamp(2000, 13)
        with pytest.raises(ValueError):
            MonthStamp.parse("2000/01")

    def test_months_since(self):
        assert MonthStamp(2002, 3).months_since(MonthStamp(2001, 10)) == 5


class TestMonthlySeries:
    def test_calendar_access(self):
        s = series([1.0, 2.0, 3.0], MonthStamp(2001, 11))
        assert s.end == MonthStamp(2002, 1)
        assert s.at(MonthStamp(2001, 12)) == 2.0
        with pytest.raises(KeyError):
            s.index_of(MonthStamp(2002, 2))

    def test_slice_range(self):
        s = series(np.arange(10.0))
        sub = s.slice_range(MonthStamp(2000, 3), MonthStamp(2000, 5))
        assert sub.start == MonthStamp(2000, 3)
        assert list(sub.values) == [2.0, 3.0, 4.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            series([])


class TestLogReturns:
    def test_constant_series(self):
        r = log_returns(series([100, 100, 100]))
        assert np.allclose(r.values, [0.0, 0.0])
        assert r.start == MonthStamp(2000, 2)

    def test_closed_form(self):
        r = log_returns(series([100, 110]))
        assert r.values[0] == pytest.approx(math.log(1.1), abs=1e-12)

    def test_zero_price_rejected(self):
        with pytest.raises(DataError, match="2000-02"):
            log_returns(series([100, 0, 50]))

    def test_too_short(self):
        with pytest.raises(DataError):
            log_returns(series([100]))

    @given(
        st.lists(st.floats(1.0, 1e4), min_size=2, max_size=40),
        st.floats(0.01, 100.0),
    )
    def test_scale_invariance(self, prices, c):
        base = log_returns(series(prices)).values
        scaled = log_returns(series([c * p for p in prices])).values
        assert np.allclose(base, scaled, atol=1e-9)


class TestRollingMeanStd:
    def test_exact_arithmetic(self):
        means, stds = rolling_mean_std(series([1, 2, 3, 4]), 3)
        assert np.allclose(means.values, [2.0, 3.0])
        assert np.allclose(stds.values, [1.0, 1.0])
        assert means.start == MonthStamp(2000, 3)

    def test_constant_series_zero_std(self):
        _, stds = rolling_mean_std(series([5.0] * 10), 4)
        assert np.all(stds.values == 0.0)

    def test_matches_bruteforce(self, rng):
        x = rng.standard_normal(60)
        means, stds = rolling_mean_std(series(x), 12)
        for i in range(len(means)):
            w = x[i : i + 12]
            assert means.values[i] == pytest.approx(w.mean(), abs=1e-12)
            assert stds.values[i] == pytest.approx(w.std(ddof=1), abs=1e-12)

    def test_window_too_long(self):
        with pytest.raises(DataError):
            rolling_mean_std(series([1, 2, 3]), 4)


class TestBand:
    def test_constant_k_sigma_collapses(self):
        b = band(series([7.0] * 30), 10, "k-sigma", 2.0)
        assert np.allclose(b.lower.values, 7.0)
        assert np.allclose(b.upper.values, 7.0)
        assert np.allclose(b.center.values, 7.0)

    def test_constant_log_factor_collapses(self):
        b = band(series([3.0] * 30), 10, "log-sigma-factor", 1.0)
        assert np.allclose(b.lower.values, 3.0)
        assert np.allclose(b.upper.values, 3.0)

    def test_lognormal_matches_direct(self, rng):
        x = np.exp(rng.normal(0.0, 0.4, 80))
        b = band(series(x), 12, "log-sigma-factor", 1.0)
        for i in range(len(b.center)):
            w = x[i : i + 12]
            c = w.mean()
            f = math.exp(np.log(w).std(ddof=1))
            assert b.center.values[i] == pytest.approx(c, abs=1e-10)
            assert b.lower.values[i] == pytest.approx(c / f, abs=1e-10)
            assert b.upper.values[i] == pytest.approx(c * f, abs=1e-10)

    def test_geometric_symmetry(self, rng):
        x = np.exp(rng.normal(0.0, 0.3, 50))
        b = band(series(x), 8, "log-sigma-factor", 1.5)
        assert np.allclose(b.lower.values * b.upper.values, b.center.values**2, rtol=1e-12)

    def test_k_sigma_symmetric_about_center(self, rng):
        x = rng.standard_normal(50)
        b = band(series(x), 10, "k-sigma", 2.0)
        assert np.allclose(
            b.upper.values - b.center.values, b.center.values - b.lower.values, atol=1e-12
        )
        assert np.all(b.lower.values <= b.center.values)
        assert np.all(b.center.values <= b.upper.values)

    def test_centered_alignment(self):
        b = band(series(np.arange(24.0)), 12, "k-sigma", 1.0, align="centered")
        assert b.center.start == MonthStamp(2000, 7)
        assert len(b.center) == 13

    def test_nonpositive_rejected_for_log_rule(self):
        with pytest.raises(DataError):
            band(series([1.0, -1.0] * 10), 4, "log-sigma-factor", 1.0)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            band(series([1.0] * 10), 5, "k-sigma", 0.0)
        with pytest.raises(ValueError):
            band(series([1.0] * 10), 5, "median")


class TestMannKendall:
    def test_strictly_increasing(self):
        t = mann_kendall(series([1, 2, 3, 4, 5]))
        assert t.s_statistic == 10
        assert t.direction == "increasing"

    def test_constant(self):
        t = mann_kendall(series([7, 7, 7, 7, 7]))
        assert t.s_statistic == 0
        assert t.z_score == 0.0
        assert t.direction == "none"

    def test_too_short(self):
        with pytest.raises(DataError):
            mann_kendall(series([1, 2, 3]))

    def _brute_force(self, x, alpha=0.05):
        n = len(x)
        s = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                s += int(np.sign(x[j] - x[i]))
        tie_term = 0.0
        for v in set(x):
            t = list(x).count(v)
            if t > 1:
                tie_term += t * (t - 1) * (2 * t + 5)
        var_s = (n * (n - 1) * (2 * n + 5) - tie_term) / 18.0
        if s > 0:
            z = (s - 1) / math.sqrt(var_s)
        elif s < 0:
            z = (s + 1) / math.sqrt(var_s)
        else:
            z = 0.0
        p = math.erfc(abs(z) / math.sqrt(2))
        return s, var_s, z, p

    def test_matches_bruteforce_with_ties(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 60))
            x = rng.integers(0, 8, n).astype(float)  # heavy ties
            t = mann_kendall(series(x))
            s, var_s, z, p = self._brute_force(x)
            assert t.s_statistic == s
            assert t.variance_s == pytest.approx(var_s, rel=1e-12)
            assert t.z_score == pytest.approx(z, rel=1e-12, abs=1e-300)
            assert t.p_value == pytest.approx(p, rel=1e-12)

    # integer grid keeps distinct values distinct through the affine map
    @given(st.lists(st.integers(-1000, 1000), min_size=4, max_size=30), st.floats(0.5, 3.0))
    @settings(max_examples=50)
    def test_monotone_transform_invariance(self, xs, a):
        t1 = mann_kendall(series([float(x) for x in xs]))
        t2 = mann_kendall(series([a * x + 1.0 for x in xs]))
        assert t1.s_statistic == t2.s_statistic


class TestOlsTrend:
    def test_exact_line(self):
        s = series([2 * t + 1 for t in range(10)])
        slope, intercept = ols_trend(s)
        assert slope == pytest.approx(2.0, abs=1e-10)
        assert intercept == pytest.approx(1.0, abs=1e-10)

    def test_constant(self):
        slope, intercept = ols_trend(series([4.0] * 8))
        assert slope == pytest.approx(0.0, abs=1e-12)
        assert intercept == pytest.approx(4.0, abs=1e-12)

    def test_matches_normal_equations(self, rng):
        x = 0.3 * np.arange(40) + rng.standard_normal(40)
        slope, intercept = ols_trend(series(x))
        t = np.arange(40.0)
        A = np.array([[40.0, t.sum()], [t.sum(), (t * t).sum()]])
        b = np.array([x.sum(), (t * x).sum()])
        sol = np.linalg.solve(A, b)
        assert intercept == pytest.approx(sol[0], abs=1e-10)
        assert slope == pytest.approx(sol[1], abs=1e-10)


class TestSmooth:
    def test_constant_unchanged(self):
        s = series([3.0] * 9)
        assert np.allclose(smooth(s, 5).values, 3.0)

    def test_impulse(self):
        out = smooth(series([0, 0, 1, 0, 0]), 3)
        assert np.allclose(out.values, [0, 1 / 3, 1 / 3, 1 / 3, 0])

    def test_linear_unchanged(self):
        s = series(np.arange(20.0))
        assert np.allclose(smooth(s, 7).values, s.values, atol=1e-12)

    def test_window_one_identity(self, rng):
        x = rng.standard_normal(15)
        assert np.allclose(smooth(series(x), 1).values, x)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            smooth(series([1.0] * 10), 4)

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=25))
    @settings(max_examples=50)
    def test_preserves_length_and_calendar(self, xs):
        s = series(xs)
        out = smooth(s, 3)
        assert len(out) == len(s)
        assert out.start == s.start
