"""Small dense optimizers used by tomography and curve fitting."""

from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .errors import ConvergenceError


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    grad_norm: float
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)
    method: str = "bfgs"


def bfgs_ascent(fun, x0, gtol=C.MLE_GTOL, ftol=C.MLE_FTOL, max_iter=C.MLE_MAX_ITER):
    """Maximize ``fun`` (returning ``(value, grad)``) with BFGS and Armijo backtracking.

    Every accepted step leaves the objective no lower, so ``history`` is
    non-decreasing. Near the optimum, value differences drown in rounding, so
    a step that keeps ``f`` and shrinks the gradient is also accepted. Stops
    when the gradient norm drops below ``gtol``, no acceptable step exists, or
    the objective changes by less than ``ftol`` (relative to ``1 + |f|``)
    without the gradient shrinking.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    n = x.size
    H = np.eye(n)
    history = [f]
    for it in range(1, max_iter + 1):
        gnorm = np.linalg.norm(g)
        if gnorm < gtol:
            return AscentResult(x, f, gnorm, it - 1, True, history)
        d = H @ g
        slope = g @ d
        if slope <= 0:
            H = np.eye(n)
            d = g.copy()
            slope = g @ g
        step = 1.0
        while True:
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and (f_new >= f + 1e-4 * step * slope
                                       or (f_new >= f and np.linalg.norm(g_new) < gnorm)):
                break
            step *= 0.5
            if step < 1e-20:
                break
        if not (np.isfinite(f_new) and f_new >= f) or step < 1e-20:
            # Line search exhausted: no ascent direction left at machine precision.
            return AscentResult(x, f, gnorm, it, True, history)
        s = x_new - x
        yv = g - g_new  # gradient change of the minimization problem -f
        sy = s @ yv
        df = f_new - f
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if sy > 1e-300:
            rho = 1.0 / sy
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (yv @ Hy) + rho) * np.outer(s, s)
        if df < ftol * (1.0 + abs(f)) and np.linalg.norm(g) > 0.5 * gnorm:
            return AscentResult(x, f, np.linalg.norm(g), it, True, history)
    best = AscentResult(x, f, np.linalg.norm(g), max_iter, False, history)
    raise ConvergenceError(f"BFGS ascent did not converge in {max_iter} iterations", best=best)


def simplex_ascent(value_fun, x0, max_iter=C.MLE_MAX_ITER * 20):
    """Derivative-free fallback: Nelder-Mead on ``-value_fun``."""
    from scipy.optimize import minimize

    def neg(x):
        v = value_fun(x)
        return -v if np.isfinite(v) else np.inf

    res = minimize(neg, x0, method="Nelder-Mead",
                   options={"maxiter": max_iter, "maxfev": max_iter, "xatol": 1e-10, "fatol": 1e-13})
    return AscentResult(res.x, -res.fun, np.nan, res.nit, bool(res.success), [-res.fun], method="nelder-mead")


def poisson_newton(A, n, x0, max_iter=C.NEWTON_MAX_ITER):
    """Maximize the concave ``sum(n log(A x) - A x)`` by damped Newton steps.

    Used to polish estimates whose counts are linear in the coefficients
    ``x``. Returns ``(x, value, converged)``; the value is ``-inf`` once a
    positive-count row would get a non-positive mean.
    """
    pos = n > 0

    def value(x):
        q = A @ x
        if np.any(q[pos] <= 0) or not np.all(np.isfinite(q)):
            return -np.inf
        return float(np.sum(n[pos] * np.log(q[pos])) - np.sum(q))

    x = np.array(x0, dtype=float)
    f = value(x)
    if not np.isfinite(f):
        return x, f, False
    for _ in range(max_iter):
        q = A @ x
        ratio = np.where(pos, n / np.where(pos, q, 1.0), 0.0)
        g = A.T @ (ratio - 1.0)
        H = A.T @ (A * (ratio / np.where(pos, q, 1.0))[:, None])
        dx = np.linalg.lstsq(H, g, rcond=None)[0]
        decrement = g @ dx
        if not np.isfinite(decrement):
            return x, f, False
        if decrement <= 1e-24 * (1.0 + abs(f)):
            return x, f, True
        step = 1.0
        while step > 1e-12:
            f_new = value(x + step * dx)
            # In the quadratic regime the full step is taken even if rounding hides the gain.
            if f_new >= f or (step == 1.0 and np.isfinite(f_new) and decrement < 1e-12 * (1.0 + abs(f))):
                break
            step *= 0.5
        else:
            return x, f, True
        x, f = x + step * dx, f_new
    return x, f, False


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    n_iter: int
    converged: bool


def levenberg_marquardt(residual, jacobian, x0, max_iter=C.LM_MAX_ITER, xtol=C.LM_XTOL, bounds_ok=None):
    """Minimize ``0.5 * |r(x)|^2`` by Gauss-Newton steps with Levenberg damping.

    ``bounds_ok(x)`` may reject trial points (e.g. a non-positive lifetime).
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    cost = 0.5 * r @ r
    lam = 1e-3
    J = jacobian(x)
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        if np.linalg.norm(g, np.inf) < 1e-14 * (1.0 + cost):
            return LMResult(x, cost, J, it, True)
        improved = False
        for _ in range(60):
            try:
                dx = np.linalg.solve(A + lam * np.diag(np.diag(A) + 1e-12), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + dx
            if bounds_ok is None or bounds_ok(x_new):
                r_new = residual(x_new)
                cost_new = 0.5 * r_new @ r_new
                if np.isfinite(cost_new) and cost_new <= cost:
                    improved = True
                    break
            lam *= 10.0
        if not improved:
            return LMResult(x, cost, J, it, True)
        small = np.linalg.norm(dx) <= xtol * (np.linalg.norm(x) + xtol)
        tiny_gain = cost - cost_new <= 1e-15 * (1.0 + cost)
        x, r, cost = x_new, r_new, cost_new
        J = jacobian(x)
        lam = max(lam / 10.0, 1e-12)
        if small or tiny_gain:
            return LMResult(x, cost, J, it, True)
    raise ConvergenceError(f"Levenberg-Marquardt did not converge in {max_iter} iterations",
                           best=LMResult(x, cost, J, max_iter, False))
