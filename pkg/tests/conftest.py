import numpy as np
import pytest

from agrivol.series import MonthlySeries, MonthStamp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def series(values, start=MonthStamp(2000, 1), unit="dimensionless"):
    return MonthlySeries(start, np.asarray(values, dtype=float), unit)


@pytest.fixture
def make_series():
    return series
