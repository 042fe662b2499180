"""Unconstrained minimizers used for maximum-likelihood fitting.

Two deterministic minimizers (Nelder-Mead simplex, BFGS with numeric
gradients and backtracking line search) plus central-difference gradients
and a smooth box reparameterization for bounded parameters.

Objective functions must return +inf for infeasible points instead of
raising; both minimizers treat non-finite objective values as +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericError

Bounds = Sequence[tuple[Optional[float], Optional[float]]]


@dataclass
class OptimResult:
    x_star: np.ndarray
    f_star: float
    iterations: int
    converged: bool
    termination: str


def _safe_eval(f: Callable[[np.ndarray], float], x: np.ndarray) -> float:
    v = float(f(x))
    return v if math.isfinite(v) else math.inf


def default_step(x: np.ndarray) -> np.ndarray:
    """Per-component finite-difference step: max(1e-6, 1e-7*|x_i|)."""
    return np.maximum(1e-6, 1e-7 * np.abs(x))


def numeric_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float | np.ndarray | None = None
) -> np.ndarray:
    """Central-difference gradient: (f(x + h e_i) - f(x - h e_i)) / 2h."""
    x = np.asarray(x, dtype=float)
    if h is None:
        steps = default_step(x)
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=float), x.shape).copy()
        if np.any(steps <= 0):
            raise ValueError("gradient step h must be positive")
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = steps[i]
        fp = float(f(x + e))
        fm = float(f(x - e))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericError(f"non-finite objective while differencing component {i}")
        grad[i] = (fp - fm) / (2.0 * steps[i])
    return grad


def minimize_simplex(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> OptimResult:
    """Nelder-Mead descent; converges when the simplex f-value spread < tol.

    Standard reflection/expansion/contraction/shrink coefficients
    (1, 2, 0.5, 0.5). Never returns a point worse than x0.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    if d < 1:
        raise ValueError("x0 must have at least one component")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 400 * d

    # Initial simplex: perturb each coordinate (scipy-style steps).
    simplex = np.repeat(x0[None, :], d + 1, axis=0)
    for i in range(d):
        if simplex[i + 1, i] != 0.0:
            simplex[i + 1, i] *= 1.05
        else:
            simplex[i + 1, i] = 0.00025
    fvals = np.array([_safe_eval(f, v) for v in simplex])

    # A pure f-spread test can stall on straddles symmetric about the
    # minimum, so the simplex must also have collapsed geometrically.
    xtol = math.sqrt(tol)
    iterations = 0
    converged = False
    while iterations < max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        spread = fvals[-1] - fvals[0] if math.isfinite(fvals[-1]) else math.inf
        xspread = np.max(np.abs(simplex[1:] - simplex[0]))
        if (
            math.isfinite(spread)
            and spread < tol
            and xspread < xtol * (1.0 + np.max(np.abs(simplex[0])))
        ):
            converged = True
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = _safe_eval(f, xr)
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = _safe_eval(f, xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = _safe_eval(f, xc)
                accept = fc <= fr
            else:
                xc = centroid - 0.5 * (centroid - simplex[-1])
                fc = _safe_eval(f, xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:
                # Shrink toward the best vertex.
                for i in range(1, d + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = _safe_eval(f, simplex[i])

    best = int(np.argmin(fvals))
    return OptimResult(
        x_star=simplex[best].copy(),
        f_star=float(fvals[best]),
        iterations=iterations,
        converged=converged,
        termination="simplex-spread" if converged else "iteration-limit",
    )


def minimize_bfgs(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> OptimResult:
    """Quasi-Newton descent with numeric gradients and Armijo backtracking.

    Converged when the gradient infinity-norm drops below tol. If the line
    search fails twice in a row, a short simplex run takes over from the
    current point.
    """
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    if tol <= 0:
        raise ValueError("tol must be positive")

    fx = _safe_eval(f, x)
    try:
        g = numeric_gradient(f, x)
    except NumericError:
        return _simplex_fallback(f, x, fx, 0, "gradient-failure")

    H = np.eye(d)
    iterations = 0
    failures = 0
    termination = "iteration-limit"
    converged = False

    while iterations < max_iter:
        if np.max(np.abs(g)) < tol:
            converged = True
            termination = "gradient-norm"
            break
        iterations += 1

        direction = -H @ g
        slope = float(g @ direction)
        if slope >= 0:  # not a descent direction; reset curvature
            H = np.eye(d)
            direction = -g
            slope = float(g @ direction)

        step, new_x, new_f = 1.0, None, None
        for _ in range(40):
            cand = x + step * direction
            fc = _safe_eval(f, cand)
            if fc <= fx + 1e-4 * step * slope:
                new_x, new_f = cand, fc
                break
            step *= 0.5
        if new_x is None:
            failures += 1
            if failures == 1:
                H = np.eye(d)
                continue
            return _simplex_fallback(f, x, fx, iterations, "line-search-fallback")
        failures = 0

        try:
            new_g = numeric_gradient(f, new_x)
        except NumericError:
            return _simplex_fallback(f, new_x, new_f, iterations, "gradient-failure")

        s = new_x - x
        y = new_g - g
        sy = float(s @ y)
        if sy > 1e-12:
            rho = 1.0 / sy
            I = np.eye(d)
            H = (I - rho * np.outer(s, y)) @ H @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)
        x, fx, g = new_x, new_f, new_g

    return OptimResult(x.copy(), float(fx), iterations, converged, termination)


def _simplex_fallback(f, x, fx, iterations, reason):
    inner = minimize_simplex(f, x, tol=1e-10, max_iter=200 * max(1, x.size))
    if inner.f_star <= fx:
        x, fx = inner.x_star, inner.f_star
    return OptimResult(
        np.asarray(x, dtype=float).copy(), float(fx), iterations, False, reason
    )


def _check_bounds(bounds: Bounds) -> None:
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and hi is not None and not lo < hi:
            raise ValueError(f"bounds[{i}]: need lo < hi, got ({lo}, {hi})")


def bounded_reparam(theta_unbounded: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Map unbounded reals into an open box, componentwise.

    (lo, hi) uses a scaled logistic; (lo, None) / (None, hi) use exp;
    (None, None) is the identity. Smooth and bijective onto the open box.
    """
    u = np.asarray(theta_unbounded, dtype=float)
    if u.size != len(bounds):
        raise ValueError(f"{u.size} components but {len(bounds)} bounds")
    _check_bounds(bounds)
    out = np.empty_like(u)
    for i, (lo, hi) in enumerate(bounds):
        v = u[i]
        if lo is None and hi is None:
            out[i] = v
        elif lo is None:
            out[i] = hi - math.exp(v)
        elif hi is None:
            out[i] = lo + math.exp(v)
        else:
            # overflow-safe logistic
            if v >= 0:
                sig = 1.0 / (1.0 + math.exp(-v))
            else:
                ev = math.exp(v)
                sig = ev / (1.0 + ev)
            x = lo + (hi - lo) * sig
            # float saturation can land exactly on a bound; stay strictly inside
            if x <= lo:
                x = math.nextafter(lo, hi)
            elif x >= hi:
                x = math.nextafter(hi, lo)
            out[i] = x
    return out


def bounded_reparam_inverse(theta_bounded: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Inverse of `bounded_reparam`; inputs must lie strictly inside the box."""
    x = np.asarray(theta_bounded, dtype=float)
    if x.size != len(bounds):
        raise ValueError(f"{x.size} components but {len(bounds)} bounds")
    _check_bounds(bounds)
    out = np.empty_like(x)
    for i, (lo, hi) in enumerate(bounds):
        v = x[i]
        if lo is None and hi is None:
            out[i] = v
        elif lo is None:
            if v >= hi:
                raise ValueError(f"component {i}: {v} not below upper bound {hi}")
            out[i] = math.log(hi - v)
        elif hi is None:
            if v <= lo:
                raise ValueError(f"component {i}: {v} not above lower bound {lo}")
            out[i] = math.log(v - lo)
        else:
            if not lo < v < hi:
                raise ValueError(f"component {i}: {v} outside ({lo}, {hi})")
            p = (v - lo) / (hi - lo)
            out[i] = math.log(p / (1.0 - p))
    return out
