"""Small scalar root finders used throughout the package."""

from __future__ import annotations

import math
from typing import Callable

from .errors import SolverFailure


def newton_bisect(
    f: Callable[[float], tuple[float, float]],
    lo: float,
    hi: float,
    xtol: float = 1e-15,
    ftol: float = 0.0,
    max_iter: int = 200,
) -> float:
    """Safeguarded Newton iteration on a sign-changing bracket.

    ``f`` returns ``(value, derivative)``. A Newton step is taken whenever it
    stays inside the current bracket and shrinks the residual fast enough;
    otherwise the bracket is bisected.
    """
    flo, _ = f(lo)
    fhi, _ = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise SolverFailure("root is not bracketed", bracket=(lo, hi))
    # orient so that f(a) < 0 < f(b)
    a, b = (lo, hi) if flo < 0.0 else (hi, lo)
    x = 0.5 * (lo + hi)
    dx_old = abs(hi - lo)
    dx = dx_old
    fx, dfx = f(x)
    for _ in range(max_iter):
        if abs(fx) <= ftol:
            return x
        newton_ok = dfx != 0.0
        if newton_ok:
            step = fx / dfx
            x_new = x - step
            newton_ok = (min(a, b) < x_new < max(a, b)) and abs(2.0 * step) <= dx_old
        if newton_ok:
            dx_old, dx = dx, abs(step)
            x = x_new
        else:
            dx_old = dx
            x = 0.5 * (a + b)
            dx = 0.5 * abs(b - a)
        if dx <= xtol * max(1.0, abs(x)):
            return x
        fx, dfx = f(x)
        if fx < 0.0:
            a = x
        else:
            b = x
    raise SolverFailure("newton_bisect did not converge", bracket=(min(a, b), max(a, b)))


def damped_newton(
    f: Callable[[float], tuple[float, float]],
    x0: float,
    tol: float = 1e-12,
    max_iter: int = 50,
    scale: float = 1.0,
) -> float:
    """Newton iteration with backtracking on |f|; converges when |f| <= tol*scale."""
    x = x0
    fx, dfx = f(x)
    for _ in range(max_iter):
        if not math.isfinite(fx):
            break
        if abs(fx) <= tol * scale:
            return x
        if dfx == 0.0 or not math.isfinite(dfx):
            break
        step = fx / dfx
        if abs(step) <= 4e-16 * max(1.0, abs(x)):
            return x
        lam = 1.0
        while lam > 1e-6:
            x_try = x - lam * step
            try:
                f_try, df_try = f(x_try)
            except (ValueError, ZeroDivisionError, ArithmeticError):
                f_try, df_try = math.inf, 0.0
            if math.isfinite(f_try) and abs(f_try) < abs(fx):
                break
            lam *= 0.5
        else:
            break
        x, fx, dfx = x_try, f_try, df_try
    raise SolverFailure(f"damped Newton failed to converge from x0={x0!r}", bracket=None)
