"""Exponential GARCH for conditional volatility of monthly log-returns.

The log-variance recursion

    ln s2_t = nu + sum_i kappa_i (|z_{t-i}| - sqrt(2/pi))
                 + sum_j delta_j z_{t-j}
                 + sum_k phi_k ln s2_{t-k},        z_t = r_t / s_t

is filtered over a zero-mean return series with Gaussian innovations.
Pre-sample lagged log-variances use a caller-supplied initial value and
pre-sample standardized shocks are zero. sum|phi| < 1 keeps the
unconditional log-variance finite; the fit enforces it through a smooth
map of the unconstrained optimizer space onto the open L1 ball.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import FitError, NumericError
from .optimize import minimize_bfgs, minimize_simplex
from .series import MonthlySeries, MonthStamp

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class EgarchOrders:
    """Lag counts: p magnitude terms, o asymmetry terms, q persistence terms."""

    p: int = 1
    o: int = 1
    q: int = 1

    def __post_init__(self):
        for name, v in (("p", self.p), ("o", self.o), ("q", self.q)):
            if not 0 <= v <= 12:
                raise ValueError(f"order {name} must be in 0..12, got {v}")
        if self.p + self.o + self.q < 1:
            raise ValueError("at least one lag term is required")


@dataclass
class EgarchParams:
    nu: float
    kappa: np.ndarray
    delta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        self.delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))

    def matches(self, orders: EgarchOrders) -> bool:
        return (
            self.kappa.size == orders.p
            and self.delta.size == orders.o
            and self.phi.size == orders.q
        )


@dataclass
class EgarchFit:
    orders: EgarchOrders
    params: EgarchParams
    sigma: MonthlySeries
    loglik: float
    aic: float
    n_obs: int
    init_logvar: float
    converged: bool
    termination: str


@njit(cache=True)
def _logvar_recursion(r, nu, kappa, delta, phi, init_logvar):
    n = r.shape[0]
    p = kappa.shape[0]
    o = delta.shape[0]
    q = phi.shape[0]
    logvar = np.empty(n)
    sigma = np.empty(n)
    for t in range(n):
        lv = nu
        for i in range(p):
            j = t - 1 - i
            if j >= 0:
                if sigma[j] <= 0.0 or not np.isfinite(sigma[j]):
                    logvar[t:] = np.nan
                    return logvar
                lv += kappa[i] * (abs(r[j] / sigma[j]) - _SQRT_2_OVER_PI)
        for i in range(o):
            j = t - 1 - i
            if j >= 0:
                if sigma[j] <= 0.0 or not np.isfinite(sigma[j]):
                    logvar[t:] = np.nan
                    return logvar
                lv += delta[i] * (r[j] / sigma[j])
        for i in range(q):
            j = t - 1 - i
            lv += phi[i] * (logvar[j] if j >= 0 else init_logvar)
        logvar[t] = lv
        sigma[t] = np.exp(0.5 * lv)
    return logvar


def _filter_logvar(
    params: EgarchParams, orders: EgarchOrders, returns: MonthlySeries, init_logvar: float
) -> np.ndarray:
    if not params.matches(orders):
        raise ValueError("parameter vector lengths do not match orders")
    if not math.isfinite(init_logvar):
        raise ValueError("init_logvar must be finite")
    r = returns.values
    if not np.all(np.isfinite(r)):
        raise ValueError("returns contain non-finite values")
    logvar = _logvar_recursion(
        r, float(params.nu), params.kappa, params.delta, params.phi, float(init_logvar)
    )
    bad = np.flatnonzero(~np.isfinite(logvar) | (0.5 * logvar > 709.0))  # exp would overflow
    if bad.size:
        raise NumericError(
            f"log-variance recursion left the finite range at {returns.stamp_at(int(bad[0]))}"
        )
    return logvar


def egarch_filter(
    params: EgarchParams,
    orders: EgarchOrders,
    returns: MonthlySeries,
    init_logvar: float,
) -> MonthlySeries:
    """Conditional volatility sigma_t implied by the parameters.

    Aligned to the return calendar; strictly positive by construction.
    """
    logvar = _filter_logvar(params, orders, returns, init_logvar)
    return MonthlySeries(returns.start, np.exp(0.5 * logvar), unit="dimensionless")


def egarch_loglik(
    params: EgarchParams,
    orders: EgarchOrders,
    returns: MonthlySeries,
    init_logvar: float,
) -> float:
    """Gaussian log-likelihood of the returns under the filtered variances."""
    logvar = _filter_logvar(params, orders, returns, init_logvar)
    r = returns.values
    return float(-0.5 * np.sum(math.log(2.0 * math.pi) + logvar + r * r * np.exp(-logvar)))


def _phi_to_l1_ball(v: np.ndarray) -> np.ndarray:
    """Bijection from R^q onto the open L1 ball {sum|phi| < 1}."""
    return v / (1.0 + np.sum(np.abs(v)))


def _phi_from_l1_ball(phi: np.ndarray) -> np.ndarray:
    c = np.sum(np.abs(phi))
    if c >= 1.0:
        raise ValueError(f"sum|phi| must be < 1, got {c}")
    return phi / (1.0 - c)


def _pack(params: EgarchParams) -> np.ndarray:
    return np.concatenate(
        ([params.nu], params.kappa, params.delta, _phi_from_l1_ball(params.phi))
    )


def _unpack(u: np.ndarray, orders: EgarchOrders) -> EgarchParams:
    p, o, q = orders.p, orders.o, orders.q
    return EgarchParams(
        nu=float(u[0]),
        kappa=u[1 : 1 + p].copy(),
        delta=u[1 + p : 1 + p + o].copy(),
        phi=_phi_to_l1_ball(u[1 + p + o : 1 + p + o + q]),
    )


def egarch_fit(
    returns: MonthlySeries,
    orders: EgarchOrders = EgarchOrders(),
    min_obs: int = 30,
) -> EgarchFit:
    """Maximum-likelihood fit over the reparameterized parameter space.

    Multi-start simplex descent followed by a BFGS refinement pass; the
    better of the two is kept, so the fitted likelihood never falls below
    the starting one. Non-convergence is flagged, not raised.
    """
    n = len(returns)
    if n < min_obs:
        raise FitError(f"need at least {min_obs} returns, got {n}")
    if np.all(returns.values == returns.values[0]):
        raise FitError("returns are constant; volatility model is degenerate")
    sample_var = float(np.var(returns.values, ddof=1))
    if sample_var <= 0.0:
        raise FitError("returns have zero variance; volatility model is degenerate")
    init_logvar = math.log(sample_var)

    def objective(u: np.ndarray) -> float:
        try:
            return -egarch_loglik(_unpack(u, orders), orders, returns, init_logvar)
        except NumericError:
            return math.inf

    best = None
    f_scale = None
    for phi0 in (0.0, 0.5, 0.9):
        start = EgarchParams(
            nu=(1.0 - (phi0 if orders.q else 0.0)) * init_logvar,
            kappa=np.full(orders.p, 0.1),
            delta=np.zeros(orders.o),
            phi=np.concatenate(([phi0], np.zeros(orders.q - 1))) if orders.q else np.empty(0),
        )
        u0 = _pack(start)
        if f_scale is None:  # tolerance tracks the likelihood magnitude
            f_scale = 1.0 + abs(objective(u0))
        res = minimize_simplex(objective, u0, tol=1e-11 * f_scale)
        if best is None or res.f_star < best.f_star:
            best = res
    refined = minimize_bfgs(objective, best.x_star, tol=1e-7 * f_scale)
    converged = best.converged or refined.converged
    if refined.f_star < best.f_star:
        best = refined

    params = _unpack(best.x_star, orders)
    loglik = -best.f_star
    k = 1 + orders.p + orders.o + orders.q
    sigma = egarch_filter(params, orders, returns, init_logvar)
    return EgarchFit(
        orders=orders,
        params=params,
        sigma=sigma,
        loglik=loglik,
        aic=2.0 * k - 2.0 * loglik,
        n_obs=n,
        init_logvar=init_logvar,
        converged=converged,
        termination=best.termination,
    )


def egarch_simulate(
    params: EgarchParams,
    orders: EgarchOrders,
    n: int,
    seed: int,
    start: MonthStamp = MonthStamp(2000, 1),
) -> MonthlySeries:
    """Draw a return series from the recursion with seeded normal shocks."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not params.matches(orders):
        raise ValueError("parameter vector lengths do not match orders")
    phi_sum = float(np.sum(np.abs(params.phi)))
    if phi_sum >= 1.0:
        raise ValueError(f"explosive persistence: sum|phi| = {phi_sum} >= 1")

    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    stationary_logvar = params.nu / (1.0 - float(np.sum(params.phi)))
    logvar = np.empty(n)
    for t in range(n):
        lv = params.nu
        for i in range(orders.p):
            j = t - 1 - i
            if j >= 0:
                lv += params.kappa[i] * (abs(z[j]) - _SQRT_2_OVER_PI)
        for i in range(orders.o):
            j = t - 1 - i
            if j >= 0:
                lv += params.delta[i] * z[j]
        for i in range(orders.q):
            j = t - 1 - i
            lv += params.phi[i] * (logvar[j] if j >= 0 else stationary_logvar)
        logvar[t] = lv
    r = np.exp(0.5 * logvar) * z
    return MonthlySeries(start, r, unit="dimensionless")


def select_orders(
    returns: MonthlySeries, max_order: int = 2, min_obs: int = 30
) -> EgarchOrders:
    """Grid search over (p, o, q) in 1..max_order minimizing AIC.

    Ties break toward the smallest total order, then lexicographically.
    """
    if not 1 <= max_order <= 3:
        raise ValueError(f"max_order must be in 1..3, got {max_order}")
    candidates = []
    for p in range(1, max_order + 1):
        for o in range(1, max_order + 1):
            for q in range(1, max_order + 1):
                orders = EgarchOrders(p, o, q)
                try:
                    fit = egarch_fit(returns, orders, min_obs=min_obs)
                except (FitError, NumericError):
                    continue
                candidates.append((fit.aic, p + o + q, (p, o, q), orders))
    if not candidates:
        raise FitError("every candidate order failed to fit")
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    return candidates[0][3]


def fit_to_json(fit: EgarchFit) -> str:
    doc = {
        "orders": {"p": fit.orders.p, "o": fit.orders.o, "q": fit.orders.q},
        "params": {
            "nu": fit.params.nu,
            "kappa": fit.params.kappa.tolist(),
            "delta": fit.params.delta.tolist(),
            "phi": fit.params.phi.tolist(),
        },
        "init_logvar": fit.init_logvar,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "n_obs": fit.n_obs,
        "converged": fit.converged,
        "termination": fit.termination,
        "sigma": {
            "start": str(fit.sigma.start),
            "unit": fit.sigma.unit,
            "values": fit.sigma.values.tolist(),
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def fit_from_json(text: str) -> EgarchFit:
    doc = json.loads(text)
    orders = EgarchOrders(**doc["orders"])
    params = EgarchParams(
        nu=doc["params"]["nu"],
        kappa=np.asarray(doc["params"]["kappa"], dtype=float),
        delta=np.asarray(doc["params"]["delta"], dtype=float),
        phi=np.asarray(doc["params"]["phi"], dtype=float),
    )
    sigma = MonthlySeries(
        MonthStamp.parse(doc["sigma"]["start"]),
        np.asarray(doc["sigma"]["values"], dtype=float),
        unit=doc["sigma"]["unit"],
    )
    return EgarchFit(
        orders=orders,
        params=params,
        sigma=sigma,
        loglik=doc["loglik"],
        aic=doc["aic"],
        n_obs=doc["n_obs"],
        init_logvar=doc["init_logvar"],
        converged=doc["converged"],
        termination=doc["termination"],
    )
