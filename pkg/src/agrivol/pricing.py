"""Black-Scholes valuation of the floor-price guarantee as a European put.

The strike is the guaranteed minimum price, the spot is the market price,
and the volatility input is an annualized forecast. The zero-volatility
limit is handled exactly (deterministic discounted payoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataError
from .series import MonthlySeries, MonthStamp

_SQRT2 = math.sqrt(2.0)
_SQRT12 = math.sqrt(12.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if not math.isfinite(x):
        if math.isnan(x):
            raise ValueError("norm_cdf expects a finite argument")
        return 0.0 if x < 0 else 1.0
    return 0.5 * math.erfc(-x / _SQRT2)


@dataclass(frozen=True)
class PricingInputs:
    spot: float
    strike: float
    rate: float
    vol: float  # annualized
    maturity: float  # years

    def __post_init__(self):
        if not (self.spot > 0 and self.strike > 0):
            raise ValueError("spot and strike must be positive")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")
        if self.vol < 0:
            raise ValueError("volatility must be non-negative")
        for name in ("spot", "strike", "rate", "vol", "maturity"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class PutQuote:
    price: float
    d1: float
    d2: float
    inputs: PricingInputs


@dataclass(frozen=True)
class CallQuote:
    price: float
    d1: float
    d2: float
    inputs: PricingInputs


def _d1_d2(inp: PricingInputs) -> tuple[float, float]:
    sqt = inp.vol * math.sqrt(inp.maturity)
    if sqt > 0:  # denormal vols can underflow sigma*sqrt(T) to exactly 0
        d1 = (math.log(inp.spot / inp.strike) + (inp.rate + 0.5 * inp.vol**2) * inp.maturity) / sqt
        return d1, d1 - sqt
    # sigma -> 0 limit: d1 = d2 = +/-inf by the sign of the log-moneyness drift
    m = math.log(inp.spot / inp.strike) + inp.rate * inp.maturity
    d = math.inf if m > 0 else (-math.inf if m < 0 else 0.0)
    return d, d


def bs_put(inp: PricingInputs) -> PutQuote:
    """P = e^{-rT} K Phi(-d2) - S0 Phi(-d1)."""
    d1, d2 = _d1_d2(inp)
    price = math.exp(-inp.rate * inp.maturity) * inp.strike * norm_cdf(-d2) - inp.spot * norm_cdf(-d1)
    price = max(price, 0.0)  # guard float cancellation at the deep-OTM edge
    return PutQuote(price=price, d1=d1, d2=d2, inputs=inp)


def bs_call(inp: PricingInputs) -> CallQuote:
    """C = S0 Phi(d1) - e^{-rT} K Phi(d2)."""
    d1, d2 = _d1_d2(inp)
    price = inp.spot * norm_cdf(d1) - math.exp(-inp.rate * inp.maturity) * inp.strike * norm_cdf(d2)
    price = max(price, 0.0)
    return CallQuote(price=price, d1=d1, d2=d2, inputs=inp)


def annualize_vol(sigma_monthly: float) -> float:
    """Monthly-to-annual volatility scaling by sqrt(12)."""
    if sigma_monthly < 0:
        raise ValueError(f"volatility must be non-negative, got {sigma_monthly}")
    return sigma_monthly * _SQRT12


def deannualize_vol(sigma_annual: float) -> float:
    if sigma_annual < 0:
        raise ValueError(f"volatility must be non-negative, got {sigma_annual}")
    return sigma_annual / _SQRT12


@dataclass
class PremiumSeries:
    """Per-month put quotes with their pricing inputs retained."""

    start: MonthStamp
    quotes: list[PutQuote]
    scenario: str
    phases: list[str]

    def __post_init__(self):
        if len(self.quotes) != len(self.phases):
            raise ValueError("one phase tag per quote is required")

    def __len__(self) -> int:
        return len(self.quotes)

    def months(self) -> list[MonthStamp]:
        return [self.start.plus(i) for i in range(len(self.quotes))]

    def premiums(self) -> MonthlySeries:
        return MonthlySeries(
            self.start, [q.price for q in self.quotes], unit="INR-per-quintal"
        )


def premium_series(
    spot_path: MonthlySeries,
    msp_path: MonthlySeries,
    vol_forecast: MonthlySeries,
    rate: float,
    maturity_years: float,
    scenario: str = "",
    phases: list[str] | None = None,
) -> PremiumSeries:
    """Monthly put quotes: strike = MSP, sigma = annualized monthly vol.

    All three series must share the calendar; volatility is monthly and is
    annualized here before pricing.
    """
    for name, s in (("msp_path", msp_path), ("vol_forecast", vol_forecast)):
        if not s.same_calendar(spot_path):
            raise ValueError(f"{name} is not calendar-aligned with spot_path")
    if phases is not None and len(phases) != len(spot_path):
        raise ValueError("phases must tag every month")
    bad = [i for i, v in enumerate(spot_path.values) if v <= 0]
    if bad:
        raise DataError(f"non-positive spot at {spot_path.stamp_at(bad[0])}")
    bad = [i for i, v in enumerate(msp_path.values) if v <= 0]
    if bad:
        raise DataError(f"non-positive MSP at {msp_path.stamp_at(bad[0])}")

    quotes = []
    for i in range(len(spot_path)):
        inp = PricingInputs(
            spot=float(spot_path.values[i]),
            strike=float(msp_path.values[i]),
            rate=rate,
            vol=annualize_vol(float(vol_forecast.values[i])),
            maturity=maturity_years,
        )
        quotes.append(bs_put(inp))
    tags = list(phases) if phases is not None else ["historical"] * len(quotes)
    return PremiumSeries(start=spot_path.start, quotes=quotes, scenario=scenario, phases=tags)
