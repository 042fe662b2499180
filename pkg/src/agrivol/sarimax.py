"""Seasonal ARIMA with exogenous regressors, estimated by Kalman-filter MLE.

The model treats the exogenous part as a regression whose residual follows
the (seasonally) differenced ARMA implied by the reduced lag polynomials

    a_p(L) A_P(L^s) (1-L)^m (1-L^s)^M y_t = b_q(L) B_Q(L^s) eps_t + z_t gamma,

with every operator written in the 1 - c1 L - c2 L^2 - ... convention (the
MA polynomials included). Estimation differences y and z identically,
removes the mean of the differenced series, and evaluates the exact
Gaussian likelihood in a Harvey state-space form with stationary
initialization. Stationarity/invertibility are enforced through the
partial-autocorrelation reparameterization, so the optimizer roams an
unconstrained space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np
from numba import njit
from scipy.linalg import solve_discrete_lyapunov

from .errors import DataError, FitError, NumericError
from .optimize import minimize_bfgs, minimize_simplex
from .series import BandSeries, MonthlySeries, MonthStamp

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SarimaxOrders:
    """(p, m, q) non-seasonal and (P, M, Q, s) seasonal orders."""

    p: int = 1
    m: int = 0
    q: int = 1
    P: int = 0
    M: int = 0
    Q: int = 0
    s: int = 12

    def __post_init__(self):
        for name in ("p", "m", "q", "P", "M", "Q"):
            if getattr(self, name) < 0:
                raise ValueError(f"order {name} must be >= 0")
        if self.s < 1:
            raise ValueError(f"seasonal period must be >= 1, got {self.s}")
        if self.m + self.M > 2:
            raise ValueError("total differencing m + M must be <= 2")

    @property
    def total(self) -> int:
        return self.p + self.q + self.P + self.Q + self.m + self.M


class LagPolynomial:
    """1 - c1 L - ... - cd L^d; `coefficients` stores the lag weights c."""

    def __init__(self, coefficients):
        c = np.atleast_1d(np.asarray(coefficients, dtype=float))
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        self.coefficients = c

    @property
    def degree(self) -> int:
        return self.coefficients.size

    @classmethod
    def seasonal(cls, coefficients, s: int) -> "LagPolynomial":
        """Expand A(L^s): weight i goes to lag i*s."""
        c = np.atleast_1d(np.asarray(coefficients, dtype=float))
        out = np.zeros(c.size * s)
        if c.size:
            out[s - 1 :: s] = c
        return cls(out)

    def full(self) -> np.ndarray:
        """Ascending power-series coefficients [1, -c1, ..., -cd]."""
        return np.concatenate(([1.0], -self.coefficients))

    def __mul__(self, other: "LagPolynomial") -> "LagPolynomial":
        prod = np.convolve(self.full(), other.full())
        return LagPolynomial(-prod[1:])

    def is_stable(self) -> bool:
        """True when every root of the polynomial lies outside the unit circle."""
        c = self.coefficients
        nz = np.flatnonzero(c)
        if nz.size == 0:
            return True
        full = np.concatenate(([1.0], -c[: nz[-1] + 1]))
        roots = np.polynomial.polynomial.polyroots(full)
        return bool(np.all(np.abs(roots) > 1.0))

    def __repr__(self):
        return f"LagPolynomial({self.coefficients.tolist()})"


@dataclass
class SarimaxParams:
    ar: np.ndarray
    ma: np.ndarray
    sar: np.ndarray
    sma: np.ndarray
    gamma: np.ndarray
    sigma2_eps: float

    def __post_init__(self):
        for name in ("ar", "ma", "sar", "sma", "gamma"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not self.sigma2_eps > 0:
            raise ValueError(f"sigma2_eps must be positive, got {self.sigma2_eps}")

    def matches(self, orders: SarimaxOrders) -> bool:
        return (
            self.ar.size == orders.p
            and self.ma.size == orders.q
            and self.sar.size == orders.P
            and self.sma.size == orders.Q
        )


@dataclass
class ForecastResult:
    mean: MonthlySeries
    se: MonthlySeries
    phase: str  # "historical" | "validation" | "forecast"

    def __post_init__(self):
        if not self.mean.same_calendar(self.se):
            raise ValueError("mean and se must share the calendar")
        if np.any(self.se.values < 0):
            raise ValueError("standard errors must be non-negative")


def expand_polynomials(
    orders: SarimaxOrders, params: SarimaxParams
) -> tuple[LagPolynomial, LagPolynomial]:
    """Reduced AR and MA polynomials: a_p(L)*A_P(L^s) and b_q(L)*B_Q(L^s)."""
    if not params.matches(orders):
        raise ValueError("parameter vector lengths do not match orders")
    ar = LagPolynomial(params.ar) * LagPolynomial.seasonal(params.sar, orders.s)
    ma = LagPolynomial(params.ma) * LagPolynomial.seasonal(params.sma, orders.s)
    return ar, ma


def difference(y: MonthlySeries, m: int, M: int, s: int) -> MonthlySeries:
    """Apply (1-L)^m then (1-L^s)^M; output shrinks by m + M*s months."""
    if m < 0 or M < 0 or s < 1:
        raise ValueError("differencing orders must be non-negative, s >= 1")
    if len(y) <= m + M * s:
        raise DataError(
            f"series of length {len(y)} too short for differencing (m={m}, M={M}, s={s})"
        )
    x = y.values
    for _ in range(m):
        x = x[1:] - x[:-1]
    for _ in range(M):
        x = x[s:] - x[:-s]
    return MonthlySeries(y.start.plus(m + M * s), x, y.unit)


# --- parameter transforms ------------------------------------------------

def _pacf_constrain(u: np.ndarray) -> np.ndarray:
    """Map unconstrained reals to lag weights of a stable polynomial."""
    r = u / np.sqrt(1.0 + u * u)
    a = np.empty(0)
    for k in range(r.size):
        new = np.empty(k + 1)
        new[k] = r[k]
        new[:k] = a - r[k] * a[::-1]
        a = new
    return a


def _pacf_unconstrain(a: np.ndarray) -> np.ndarray:
    """Inverse of `_pacf_constrain` for weights of a stable polynomial."""
    a = np.asarray(a, dtype=float).copy()
    r = np.empty(a.size)
    for k in range(a.size - 1, -1, -1):
        r[k] = a[k]
        denom = 1.0 - r[k] * r[k]
        if denom <= 0:
            raise ValueError("polynomial is not strictly stable")
        a = (a[:k] + r[k] * a[:k][::-1]) / denom
    r = np.clip(r, -1.0 + 1e-12, 1.0 - 1e-12)
    return r / np.sqrt(1.0 - r * r)


# --- state space ----------------------------------------------------------

def _harvey_system(ar_red: LagPolynomial, ma_red: LagPolynomial) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and shock loading for the reduced ARMA."""
    pa, qa = ar_red.degree, ma_red.degree
    k = max(pa, qa + 1)
    phi = np.zeros(k)
    phi[:pa] = ar_red.coefficients
    theta = np.zeros(k - 1)
    theta[:qa] = -ma_red.coefficients  # MA stored in the 1 - sum(b L) convention
    T = np.zeros((k, k))
    T[:, 0] = phi
    for i in range(k - 1):
        T[i, i + 1] = 1.0
    R = np.concatenate(([1.0], theta))
    return T, R


@njit(cache=True)
def _lyapunov_doubling(T, Q):
    """Solve P = T P T' + Q by doubling: X <- X + A X A', A <- A A."""
    X = Q.copy()
    A = T.copy()
    for _ in range(64):
        AXA = A @ X @ A.T
        inc = np.abs(AXA).max()
        X = X + AXA
        A = A @ A
        if inc <= 1e-16 * (1.0 + np.abs(X).max()):
            break
    return X


def _stationary_cov(T: np.ndarray, Q: np.ndarray) -> np.ndarray:
    P0 = _lyapunov_doubling(T, Q)
    if not np.all(np.isfinite(P0)):  # transient growth overflow; exact fallback
        P0 = solve_discrete_lyapunov(T, Q, method="direct")
    return 0.5 * (P0 + P0.T)


@njit(cache=True)
def _kalman_kernel(w, phi, R, sigma2, P0):
    # The transition matrix is companion-structured (phi in the first
    # column, ones on the superdiagonal), so every product is O(k^2)
    # written as explicit loops; no BLAS dispatch on tiny matrices.
    k = phi.shape[0]
    n = w.shape[0]
    a = np.zeros(k)
    P = P0.copy()
    ll = 0.0
    preds = np.empty(n)
    pred_vars = np.empty(n)
    K = np.empty(k)
    af = np.empty(k)
    M1 = np.empty((k, k))
    M2 = np.empty((k, k))
    for t in range(n):
        F = P[0, 0]
        if not np.isfinite(F) or F <= 0.0:
            for u in range(t, n):
                preds[u] = np.nan
                pred_vars[u] = np.nan
            return -np.inf, preds, pred_vars, a, P
        v = w[t] - a[0]
        preds[t] = a[0]
        pred_vars[t] = F
        ll += -0.5 * (_LOG_2PI + np.log(F) + v * v / F)
        for i in range(k):
            K[i] = P[i, 0] / F
        for i in range(k):
            af[i] = a[i] + K[i] * v
        for i in range(k):  # filtered covariance
            for j in range(k):
                M1[i, j] = P[i, j] - K[i] * P[0, j]
        for i in range(k):  # a <- T af
            nxt = af[i + 1] if i + 1 < k else 0.0
            a[i] = phi[i] * af[0] + nxt
        for i in range(k):  # M2 <- T M1
            for j in range(k):
                nxt = M1[i + 1, j] if i + 1 < k else 0.0
                M2[i, j] = phi[i] * M1[0, j] + nxt
        for i in range(k):  # P <- M2 T' + sigma2 R R'
            for j in range(k):
                nxt = M2[i, j + 1] if j + 1 < k else 0.0
                P[i, j] = phi[j] * M2[i, 0] + nxt + sigma2 * R[i] * R[j]
        for i in range(k):  # keep symmetric against drift
            for j in range(i + 1, k):
                m = 0.5 * (P[i, j] + P[j, i])
                P[i, j] = m
                P[j, i] = m
    return ll, preds, pred_vars, a, P


def _filter_w(
    orders: SarimaxOrders,
    params: SarimaxParams,
    w: np.ndarray,
    check_stationary: bool = True,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Run the filter on a regression-adjusted series; returns
    (loglik, one-step means, one-step variances, end state, end state cov).

    `check_stationary` can be skipped when the parameters come from the
    constraining transform, which produces stable polynomials by design.
    """
    ar_red, ma_red = expand_polynomials(orders, params)
    if check_stationary and not ar_red.is_stable():
        raise DataError("reduced AR polynomial is non-stationary")
    T, R = _harvey_system(ar_red, ma_red)
    Q = params.sigma2_eps * np.outer(R, R)
    P0 = _stationary_cov(T, Q)
    return _kalman_kernel(
        np.ascontiguousarray(w, dtype=float), T[:, 0].copy(), R, params.sigma2_eps, P0
    )


def _exog_matrix(y: MonthlySeries, exog) -> np.ndarray:
    cols = list(exog) if exog else []
    if not cols:
        return np.empty((len(y), 0))
    for i, x in enumerate(cols):
        if not x.same_calendar(y):
            raise ValueError(
                f"exog column {i} calendar {x.start}..{x.end} does not match "
                f"y calendar {y.start}..{y.end}"
            )
    return np.column_stack([x.values for x in cols])


def kalman_loglik(
    orders: SarimaxOrders, params: SarimaxParams, y: MonthlySeries, exog=None
) -> float:
    """Exact Gaussian log-likelihood of an already-differenced series.

    `y` and `exog` must have been differenced identically; the regression
    term z_t gamma is removed and the residual filtered as the reduced ARMA
    with stationary initial state covariance.
    """
    X = _exog_matrix(y, exog)
    if X.shape[1] != params.gamma.size:
        raise ValueError(
            f"{X.shape[1]} exog columns but {params.gamma.size} gamma coefficients"
        )
    w = y.values - (X @ params.gamma if params.gamma.size else 0.0)
    ll, *_ = _filter_w(orders, params, w)
    return float(ll)


# --- fitting ----------------------------------------------------------------

def _pack_params(params: SarimaxParams, orders: SarimaxOrders) -> np.ndarray:
    return np.concatenate(
        (
            _pacf_unconstrain(params.ar),
            _pacf_unconstrain(params.sar),
            _pacf_unconstrain(params.ma),
            _pacf_unconstrain(params.sma),
            params.gamma,
            [math.log(params.sigma2_eps)],
        )
    )


def _unpack_params(u: np.ndarray, orders: SarimaxOrders, n_exog: int) -> SarimaxParams:
    p, q, P, Q = orders.p, orders.q, orders.P, orders.Q
    i = 0
    ar = _pacf_constrain(u[i : i + p]); i += p
    sar = _pacf_constrain(u[i : i + P]); i += P
    ma = _pacf_constrain(u[i : i + q]); i += q
    sma = _pacf_constrain(u[i : i + Q]); i += Q
    gamma = u[i : i + n_exog].copy(); i += n_exog
    sigma2 = math.exp(min(u[i], 700.0))
    return SarimaxParams(ar=ar, ma=ma, sar=sar, sma=sma, gamma=gamma, sigma2_eps=sigma2)


def _gamma_standard_errors(objective, u_star: np.ndarray, gamma_slice: slice) -> np.ndarray:
    """Asymptotic SEs of gamma from the numeric Hessian of the negative
    log-likelihood at the optimum. gamma enters the packed vector untouched,
    so its block of the inverse Hessian needs no transform correction."""
    d = u_star.size
    h = 1e-4 * (1.0 + np.abs(u_star))
    H = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            ei = np.zeros(d); ei[i] = h[i]
            ej = np.zeros(d); ej[j] = h[j]
            fpp = objective(u_star + ei + ej)
            fpm = objective(u_star + ei - ej)
            fmp = objective(u_star - ei + ej)
            fmm = objective(u_star - ei - ej)
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    n_gamma = gamma_slice.stop - gamma_slice.start
    try:
        cov = np.linalg.inv(H)
        var = np.diag(cov)[gamma_slice]
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            return np.full(n_gamma, np.nan)
        return np.sqrt(var)
    except np.linalg.LinAlgError:
        return np.full(n_gamma, np.nan)


def _check_collinear(X: np.ndarray, names: list[str]) -> None:
    if X.shape[1] == 0:
        return
    stds = X.std(axis=0)
    flat = [names[i] for i in np.flatnonzero(stds <= 1e-300)]
    if flat:
        raise FitError(f"exog columns with zero variance after differencing: {flat}")
    if X.shape[1] > 1:
        corr = np.corrcoef(X, rowvar=False)
        iu = np.triu_indices(X.shape[1], k=1)
        dupes = [
            f"{names[a]}~{names[b]}"
            for a, b in zip(*iu)
            if abs(corr[a, b]) > 1.0 - 1e-10
        ]
        if dupes:
            raise FitError(f"collinear exog columns: {dupes}")


@dataclass
class SarimaxModel:
    orders: SarimaxOrders
    params: SarimaxParams  # gamma on the standardized exog scale
    exog_mean: np.ndarray
    exog_std: np.ndarray
    gamma_raw: np.ndarray
    diff_mean: float
    loglik: float
    aic: float
    n_obs: int
    converged: bool
    termination: str
    y: MonthlySeries
    exog: list[MonthlySeries]
    insample: ForecastResult
    gamma_se: np.ndarray = field(default_factory=lambda: np.empty(0))
    gamma_se_raw: np.ndarray = field(default_factory=lambda: np.empty(0))
    exog_names: list[str] = field(default_factory=list)
    validation_split: dict | None = None

    def with_observations(self, y: MonthlySeries, exog) -> "SarimaxModel":
        """Same fitted parameters anchored to a different observed span."""
        exog = list(exog) if exog else []
        if len(exog) != self.exog_mean.size:
            raise ValueError("exog column count differs from the fitted model")
        insample = _onestep_result(self, y, exog, phase="historical")
        return replace(self, y=y, exog=exog, insample=insample)


def _prepare_arrays(
    model_orders: SarimaxOrders, y: MonthlySeries, exog: list[MonthlySeries]
) -> tuple[MonthlySeries, np.ndarray]:
    yd = difference(y, model_orders.m, model_orders.M, model_orders.s)
    xd = [difference(x, model_orders.m, model_orders.M, model_orders.s) for x in exog]
    X = _exog_matrix(yd, xd)
    return yd, X


def sarimax_fit(
    y: MonthlySeries,
    exog=None,
    orders: SarimaxOrders = SarimaxOrders(),
    exog_names: list[str] | None = None,
    min_obs: int | None = None,
) -> SarimaxModel:
    """Maximum-likelihood fit; exog are standardized with training moments.

    The differenced dependent series is demeaned before filtering (the mean
    is stored and restored in predictions). Optimizer failures are flagged
    on the result, never silently discarded.
    """
    exog = list(exog) if exog else []
    names = list(exog_names) if exog_names else [f"x{i}" for i in range(len(exog))]
    if len(names) != len(exog):
        raise ValueError("exog_names length must match exog")
    for i, x in enumerate(exog):
        if not x.same_calendar(y):
            raise ValueError(f"exog column {names[i]} is not calendar-aligned with y")

    yd, X = _prepare_arrays(orders, y, exog)
    n = len(yd)
    floor = min_obs if min_obs is not None else 3 * orders.s
    if n < floor:
        raise FitError(f"need at least {floor} observations after differencing, got {n}")
    _check_collinear(X, names)

    mean = X.mean(axis=0) if X.size else np.empty(0)
    std = X.std(axis=0, ddof=0) if X.size else np.empty(0)
    Xs = (X - mean) / std if X.size else X
    dm = float(yd.values.mean())
    w_target = yd.values - dm

    if Xs.size:
        gamma0, *_ = np.linalg.lstsq(Xs, w_target, rcond=None)
        resid = w_target - Xs @ gamma0
    else:
        gamma0 = np.empty(0)
        resid = w_target
    sigma2_0 = max(float(np.var(resid)), 1e-10)

    start = SarimaxParams(
        ar=np.zeros(orders.p),
        ma=np.zeros(orders.q),
        sar=np.zeros(orders.P),
        sma=np.zeros(orders.Q),
        gamma=gamma0,
        sigma2_eps=sigma2_0,
    )

    def objective(u: np.ndarray) -> float:
        try:
            params = _unpack_params(u, orders, len(exog))
        except (ValueError, OverflowError):
            return math.inf
        w = w_target - (Xs @ params.gamma if params.gamma.size else 0.0)
        try:
            ll, *_ = _filter_w(orders, params, w, check_stationary=False)
        except (DataError, NumericError):
            return math.inf
        return -ll if math.isfinite(ll) else math.inf

    # Tolerances scale with the likelihood magnitude; an absolute 1e-10
    # spread is below float resolution for |ll| in the thousands.
    u0 = _pack_params(start, orders)
    f0 = objective(u0)
    f_scale = 1.0 + abs(f0)
    res = minimize_simplex(objective, u0, tol=1e-11 * f_scale)
    refined = minimize_bfgs(objective, res.x_star, tol=1e-7 * f_scale)
    # Either stage converging by its own criterion counts; the refinement
    # pass often ends on a line-search failure at an already-found optimum.
    converged = res.converged or refined.converged
    if refined.f_star < res.f_star:
        res = refined

    params = _unpack_params(res.x_star, orders, len(exog))
    loglik = -res.f_star
    k_params = orders.p + orders.q + orders.P + orders.Q + len(exog) + 1
    gamma_raw = params.gamma / std if params.gamma.size else np.empty(0)
    if len(exog):
        g0 = orders.p + orders.P + orders.q + orders.Q
        gamma_se = _gamma_standard_errors(objective, res.x_star, slice(g0, g0 + len(exog)))
        gamma_se_raw = gamma_se / std
    else:
        gamma_se = np.empty(0)
        gamma_se_raw = np.empty(0)

    model = SarimaxModel(
        orders=orders,
        params=params,
        exog_mean=mean,
        exog_std=std,
        gamma_raw=gamma_raw,
        diff_mean=dm,
        loglik=loglik,
        aic=2.0 * k_params - 2.0 * loglik,
        n_obs=n,
        converged=converged,
        termination=res.termination,
        y=y,
        exog=exog,
        insample=None,  # filled below
        gamma_se=gamma_se,
        gamma_se_raw=gamma_se_raw,
        exog_names=names,
    )
    model.insample = _onestep_result(model, y, exog, phase="historical")
    return model


def _standardize(model: SarimaxModel, X: np.ndarray) -> np.ndarray:
    if X.size == 0:
        return X
    return (X - model.exog_mean) / model.exog_std


def _onestep_result(
    model: SarimaxModel, y: MonthlySeries, exog: list[MonthlySeries], phase: str
) -> ForecastResult:
    """One-step-ahead predictions of the levels over an observed span."""
    o = model.orders
    yd, X = _prepare_arrays(o, y, exog)
    Xs = _standardize(model, X)
    reg = Xs @ model.params.gamma if model.params.gamma.size else np.zeros(len(yd))
    w = yd.values - model.diff_mean - reg
    _, preds_w, pred_vars, _, _ = _filter_w(o, model.params, w)
    if not np.all(np.isfinite(preds_w)):
        raise NumericError("Kalman filter produced non-finite predictions")
    preds_d = preds_w + model.diff_mean + reg
    # One step ahead the lagged levels are observed, so the level prediction
    # shifts the differenced prediction by (actual level - actual difference).
    offset = o.m + o.M * o.s
    level_actual = y.values[offset:]
    preds_level = preds_d + (level_actual - yd.values)
    se = np.sqrt(pred_vars)
    start = y.start.plus(offset)
    return ForecastResult(
        mean=MonthlySeries(start, preds_level, y.unit),
        se=MonthlySeries(start, se, y.unit),
        phase=phase,
    )


def sarimax_onestep(
    model: SarimaxModel, y: MonthlySeries, exog=None, phase: str = "historical"
) -> ForecastResult:
    """One-step predictions with fixed parameters over any observed span."""
    return _onestep_result(model, y, list(exog) if exog else [], phase)


def _integration_weights(m: int, M: int, s: int, n: int) -> np.ndarray:
    """Power-series coefficients of 1 / ((1-L)^m (1-L^s)^M), length n."""
    c = np.zeros(n)
    c[0] = 1.0
    for _ in range(m):
        c = np.cumsum(c)
    for _ in range(M):
        acc = c.copy()
        for i in range(s, n):
            acc[i] += acc[i - s]
        c = acc
    return c


def psi_weights(ar_red: LagPolynomial, ma_red: LagPolynomial, n: int) -> np.ndarray:
    """First n MA-infinity weights of the reduced ARMA (psi_0 = 1)."""
    a = ar_red.coefficients
    b = ma_red.coefficients
    psi = np.zeros(n)
    psi[0] = 1.0
    for j in range(1, n):
        v = -b[j - 1] if j - 1 < b.size else 0.0
        upto = min(j, a.size)
        for i in range(1, upto + 1):
            v += a[i - 1] * psi[j - i]
        psi[j] = v
    return psi


def _undo_difference_path(
    y_train: np.ndarray, m: int, M: int, s: int, d_future: np.ndarray
) -> np.ndarray:
    """Future levels from future differenced values plus the observed tail."""
    stages = [y_train]
    x = y_train
    for _ in range(m):
        x = x[1:] - x[:-1]
        stages.append(x)
    for _ in range(M):
        x = x[s:] - x[:-s]
        stages.append(x)
    future = d_future
    # Invert seasonal stages first (they were applied last).
    for idx in range(len(stages) - 2, -1, -1):
        base = stages[idx]
        if idx >= m:  # this stage was seasonally differenced
            tail = list(base[-s:])
            out = np.empty(future.size)
            for h in range(future.size):
                out[h] = future[h] + tail[-s]
                tail.append(out[h])
                tail.pop(0)
            future = out
        else:  # ordinary difference
            prev = base[-1]
            out = np.empty(future.size)
            for h in range(future.size):
                prev = future[h] + prev
                out[h] = prev
            future = out
    return future


def sarimax_forecast(
    model: SarimaxModel, exog_future=None, horizon: int = 1
) -> ForecastResult:
    """Mean and standard error per step after the model's observed span.

    Means iterate the state recursion with the future regression term added;
    differencing is undone against the observed tail. Standard errors come
    from the unrolled forecast-error covariance (state uncertainty plus
    shock accumulation), mapped through the integration weights.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    o = model.orders
    n_exog = model.exog_mean.size

    if n_exog:
        if exog_future is None:
            raise ValueError("model has exogenous regressors; exog_future is required")
        if isinstance(exog_future, np.ndarray):
            Xf = np.asarray(exog_future, dtype=float)
            if Xf.ndim != 2 or Xf.shape[1] != n_exog:
                raise ValueError(f"exog_future must have {n_exog} columns")
        else:
            cols = list(exog_future)
            if len(cols) != n_exog:
                raise ValueError(f"expected {n_exog} future exog series, got {len(cols)}")
            expected_start = model.y.end.plus(1)
            for i, xcol in enumerate(cols):
                if xcol.start != expected_start:
                    raise ValueError(
                        f"future exog column {i} starts at {xcol.start}, expected {expected_start}"
                    )
            Xf = np.column_stack([xcol.values for xcol in cols])
        if Xf.shape[0] < horizon:
            raise ValueError(f"exog_future has {Xf.shape[0]} rows, horizon is {horizon}")
        Xf = _standardize(model, Xf[:horizon])
        reg_future = Xf @ model.params.gamma
    else:
        reg_future = np.zeros(horizon)

    # Filter the observed span to get the end state.
    yd, X = _prepare_arrays(o, model.y, model.exog)
    Xs = _standardize(model, X)
    reg = Xs @ model.params.gamma if model.params.gamma.size else np.zeros(len(yd))
    w = yd.values - model.diff_mean - reg
    _, _, _, a_end, P_end = _filter_w(o, model.params, w)

    ar_red, ma_red = expand_polynomials(o, model.params)
    T, R = _harvey_system(ar_red, ma_red)
    sigma2 = model.params.sigma2_eps

    # Mean path of the stationary part.
    mean_w = np.empty(horizon)
    a = a_end.copy()
    for h in range(horizon):
        mean_w[h] = a[0]
        a = T @ a
    mean_d = mean_w + model.diff_mean + reg_future
    mean_level = _undo_difference_path(model.y.values, o.m, o.M, o.s, mean_d)

    # Forecast-error variance. The filter's end state is the one-step-ahead
    # prior, so its covariance already carries the first shock: the h-step
    # error is Z T^{h-1} eta_1 plus h-1 later shocks, and the level error
    # aggregates those through the integration weights.
    integ = _integration_weights(o.m, o.M, o.s, horizon)
    psi = psi_weights(ar_red, ma_red, horizon)
    psi_star = np.convolve(psi, integ)[:horizon]
    V = np.empty((horizon, T.shape[0]))
    row = np.zeros(T.shape[0])
    row[0] = 1.0
    V[0] = row
    for j in range(1, horizon):
        row = row @ T
        V[j] = row
    var = np.empty(horizon)
    shock_cum = 0.0
    for h in range(1, horizon + 1):
        s_vec = integ[:h][::-1] @ V[:h]
        var[h - 1] = float(s_vec @ P_end @ s_vec) + sigma2 * shock_cum
        shock_cum += psi_star[h - 1] ** 2
    se = np.sqrt(np.maximum(var, 0.0))

    start = model.y.end.plus(1)
    return ForecastResult(
        mean=MonthlySeries(start, mean_level, model.y.unit),
        se=MonthlySeries(start, se, model.y.unit),
        phase="forecast",
    )


def prediction_interval(fc: ForecastResult, n_se: float = 1.0) -> BandSeries:
    """Band mean +/- n_se * se; n_se = 1 gives the 68% normal band."""
    if n_se <= 0:
        raise ValueError(f"n_se must be positive, got {n_se}")
    lower = MonthlySeries(fc.mean.start, fc.mean.values - n_se * fc.se.values, fc.mean.unit)
    upper = MonthlySeries(fc.mean.start, fc.mean.values + n_se * fc.se.values, fc.mean.unit)
    return BandSeries(center=fc.mean, lower=lower, upper=upper, window=0, width_rule="k-sigma")


def select_sarimax_orders(
    y: MonthlySeries,
    exog=None,
    grid: dict | None = None,
    s: int = 12,
    min_obs: int | None = None,
) -> SarimaxOrders:
    """AIC grid search; ties break toward smaller total order, then lexicographic."""
    grid = dict(grid or {"p": (0, 1), "q": (0, 1), "P": (0, 1), "Q": (0, 1), "m": (0,), "M": (0,)})
    caps = {"p": 2, "q": 2, "P": 2, "Q": 2, "m": 1, "M": 1}
    ranges = {}
    for name, cap in caps.items():
        vals = tuple(grid.get(name, (0,)))
        if any(v < 0 or v > cap for v in vals):
            raise ValueError(f"grid values for {name} must lie in 0..{cap}")
        ranges[name] = vals

    candidates = []
    for p, m, q, P, M, Q in product(
        ranges["p"], ranges["m"], ranges["q"], ranges["P"], ranges["M"], ranges["Q"]
    ):
        orders = SarimaxOrders(p=p, m=m, q=q, P=P, M=M, Q=Q, s=s)
        try:
            model = sarimax_fit(y, exog, orders, min_obs=min_obs)
        except (FitError, DataError, NumericError):
            continue
        candidates.append((model.aic, orders.total, (p, m, q, P, M, Q), orders))
    if not candidates:
        raise FitError("every candidate order failed to fit")
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    return candidates[0][3]


def simulate_sarimax(
    orders: SarimaxOrders,
    params: SarimaxParams,
    n: int,
    exog=None,
    seed: int = 0,
    burn: int = 200,
    start: MonthStamp = MonthStamp(2000, 1),
    unit: str = "dimensionless",
) -> MonthlySeries:
    """Draw a series from the model (integration starts from zeros)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ar_red, ma_red = expand_polynomials(orders, params)
    if not ar_red.is_stable():
        raise ValueError("cannot simulate from a non-stationary AR polynomial")
    X = np.column_stack([np.asarray(x, dtype=float) for x in exog]) if exog else np.empty((n, 0))
    if X.size and X.shape[0] != n:
        raise ValueError("exog rows must equal n")

    rng = np.random.default_rng(seed)
    total = n + burn
    eps = rng.standard_normal(total) * math.sqrt(params.sigma2_eps)
    a = ar_red.coefficients
    b = ma_red.coefficients
    w = np.zeros(total)
    for t in range(total):
        v = eps[t]
        for i in range(1, min(t, b.size) + 1):
            v -= b[i - 1] * eps[t - i]
        for i in range(1, min(t, a.size) + 1):
            v += a[i - 1] * w[t - i]
        w[t] = v
    w = w[burn:]
    d = w + (X @ params.gamma if params.gamma.size else 0.0)
    for _ in range(orders.M):
        for i in range(orders.s, n):
            d[i] += d[i - orders.s]
    for _ in range(orders.m):
        d = np.cumsum(d)
    return MonthlySeries(start, d, unit)


def model_to_json(model: SarimaxModel) -> str:
    doc = {
        "orders": {
            "p": model.orders.p, "m": model.orders.m, "q": model.orders.q,
            "P": model.orders.P, "M": model.orders.M, "Q": model.orders.Q,
            "s": model.orders.s,
        },
        "params": {
            "ar": model.params.ar.tolist(),
            "ma": model.params.ma.tolist(),
            "sar": model.params.sar.tolist(),
            "sma": model.params.sma.tolist(),
            "gamma_standardized": model.params.gamma.tolist(),
            "gamma_raw": model.gamma_raw.tolist(),
            "gamma_se_standardized": model.gamma_se.tolist(),
            "gamma_se_raw": model.gamma_se_raw.tolist(),
            "sigma2_eps": model.params.sigma2_eps,
        },
        "exog_scaling": {
            "names": model.exog_names,
            "mean": model.exog_mean.tolist(),
            "std": model.exog_std.tolist(),
        },
        "diff_mean": model.diff_mean,
        "loglik": model.loglik,
        "aic": model.aic,
        "n_obs": model.n_obs,
        "converged": model.converged,
        "termination": model.termination,
        "train_start": str(model.y.start),
        "train_end": str(model.y.end),
        "validation_split": model.validation_split,
        "train_data": {
            "y": {"start": str(model.y.start), "unit": model.y.unit, "values": model.y.values.tolist()},
            "exog": [
                {"start": str(x.start), "unit": x.unit, "values": x.values.tolist()}
                for x in model.exog
            ],
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def _series_from_doc(doc: dict) -> MonthlySeries:
    return MonthlySeries(
        MonthStamp.parse(doc["start"]), np.asarray(doc["values"], dtype=float), unit=doc["unit"]
    )


def model_from_json(text: str) -> SarimaxModel:
    doc = json.loads(text)
    orders = SarimaxOrders(**doc["orders"])
    p = doc["params"]
    params = SarimaxParams(
        ar=np.asarray(p["ar"], dtype=float),
        ma=np.asarray(p["ma"], dtype=float),
        sar=np.asarray(p["sar"], dtype=float),
        sma=np.asarray(p["sma"], dtype=float),
        gamma=np.asarray(p["gamma_standardized"], dtype=float),
        sigma2_eps=p["sigma2_eps"],
    )
    y = _series_from_doc(doc["train_data"]["y"])
    exog = [_series_from_doc(x) for x in doc["train_data"]["exog"]]
    model = SarimaxModel(
        orders=orders,
        params=params,
        exog_mean=np.asarray(doc["exog_scaling"]["mean"], dtype=float),
        exog_std=np.asarray(doc["exog_scaling"]["std"], dtype=float),
        gamma_raw=np.asarray(p["gamma_raw"], dtype=float),
        diff_mean=doc["diff_mean"],
        loglik=doc["loglik"],
        aic=doc["aic"],
        n_obs=doc["n_obs"],
        converged=doc["converged"],
        termination=doc["termination"],
        y=y,
        exog=exog,
        insample=None,
        gamma_se=np.asarray(p.get("gamma_se_standardized", []), dtype=float),
        gamma_se_raw=np.asarray(p.get("gamma_se_raw", []), dtype=float),
        exog_names=list(doc["exog_scaling"]["names"]),
        validation_split=doc["validation_split"],
    )
    model.insample = _onestep_result(model, y, exog, phase="historical")
    return model
