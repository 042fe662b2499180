"""Climate-driven crop price volatility modelling and MSP put pricing.

Two-step pipeline: an exponential GARCH extracts conditional volatility
from monthly crop-price log-returns, a seasonal ARIMAX driven by climate
ensemble projections re-models and forecasts that volatility under
emissions scenarios, and a Black-Scholes put with the minimum support
price as strike turns the forecasts into insurance premiums.
"""

from .series import BandSeries, MonthlySeries, MonthStamp, TrendResult
from .egarch import EgarchFit, EgarchOrders, EgarchParams
from .sarimax import ForecastResult, SarimaxModel, SarimaxOrders, SarimaxParams
from .pricing import PremiumSeries, PricingInputs, PutQuote

__version__ = "0.1.0"

__all__ = [
    "BandSeries",
    "MonthlySeries",
    "MonthStamp",
    "TrendResult",
    "EgarchFit",
    "EgarchOrders",
    "EgarchParams",
    "ForecastResult",
    "SarimaxModel",
    "SarimaxOrders",
    "SarimaxParams",
    "PremiumSeries",
    "PricingInputs",
    "PutQuote",
    "__version__",
]
