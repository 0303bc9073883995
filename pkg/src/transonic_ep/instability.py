"""Growing modes Y = exp(lambda t) Z of the linearized subsonic problem.

The mode equation on [x0, L] is

    a Z'' + (a' - 2 u lambda - E) Z' - (lambda^2 + 2 lambda u' + rho) Z = 0,

with a = p'(rho) - u^2 and u = J/rho taken from the subsonic background,
the shock condition Z'(x0) = (2u/a)(E/(2u) + lambda) Z(x0) and Z'(L) = 0.
It is solved by shooting from the shock with Z(x0) = alpha.  The background
is integrated together with the mode, so no interpolation error enters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp

from .base import SubsonicBase
from .errors import NoModeFound, StateInvalid, UsageError
from .fitter import FitOptions, solution_with_shock_at

logger = logging.getLogger(__name__)


@dataclass
class ShootingResult:
    lam: float
    alpha: float
    x: np.ndarray
    Z: np.ndarray
    Zx: np.ndarray
    terminal_slope: float
    converged: bool
    residual: float = math.nan

    @property
    def Z_profile(self) -> np.ndarray:
        return self.Z


@dataclass
class ModeSearch:
    """Outcome of a bracketed search; ``mode`` is None when no sign change exists."""

    mode: ShootingResult | None
    lam_grid: np.ndarray
    slopes: np.ndarray
    bracket: tuple[float, float]

    @property
    def found(self) -> bool:
        return self.mode is not None


class ModeEquation:
    """Coefficients of the mode ODE along the subsonic background of a base."""

    def __init__(self, base: SubsonicBase):
        self.base = base
        self.law, self.J, self.b = base.law, base.J, base.b
        self.x0, self.L = base.x0, base.L
        self.rho0, self.E0 = float(base.rho[0]), float(base.E[0])
        self.u0 = self.J / self.rho0
        self.a0 = float(self.law.dp(self.rho0)) - self.u0 ** 2

    def initial_slope_factor(self, lam: float) -> float:
        """Z'(x0)/Z(x0) from the shock condition."""
        return 2.0 * self.u0 / self.a0 * (self.E0 / (2.0 * self.u0) + lam)

    @property
    def lam_upper(self) -> float:
        """-E(x0)/u(x0): upper end of the growth-rate bracket."""
        return -self.E0 / self.u0

    def coefficients(self, rho, E, x):
        law, J = self.law, self.J
        a = law.dp(rho) - J * J / rho ** 2
        if np.any(a <= 0.0):
            raise StateInvalid("background left the subsonic regime")
        drho = rho * E / a
        da = (law.d2p(rho) + 2.0 * J * J / rho ** 3) * drho
        du = -J * drho / rho ** 2
        return a, da, du, drho

    def rhs(self, lam: float):
        b = self.b

        def f(x, s):
            rho, E, Z, Zx = s
            a, da, du, drho = self.coefficients(rho, E, x)
            Zxx = (-(da - 2.0 * self.J / rho * lam - E) * Zx + (lam * lam + 2.0 * lam * du + rho) * Z) / a
            return [drho, rho - float(b(x)), Zx, Zxx]

        return f

    def residual(self, lam, x, Z, Zx, Zxx, rho, E):
        a, da, du, _ = self.coefficients(rho, E, x)
        u = self.J / rho
        terms = [a * Zxx, (da - 2.0 * u * lam - E) * Zx, (lam * lam + 2.0 * lam * du + rho) * Z]
        return terms[0] + terms[1] - terms[2], max(float(np.max(np.abs(t))) for t in terms)


def shoot(base: SubsonicBase, lam: float, alpha: float = 1.0, rtol: float = 1e-12,
          eq: ModeEquation | None = None, dense: bool = False) -> ShootingResult:
    """Integrate the mode ODE from the shock with Z(x0) = alpha; report Z'(L)."""
    if lam < 0.0:
        raise UsageError("growth rate must be nonnegative")
    if not alpha > 0.0:
        raise UsageError("normalization alpha must be positive")
    eq = eq or ModeEquation(base)
    s0 = [eq.rho0, eq.E0, alpha, eq.initial_slope_factor(lam) * alpha]
    sol = solve_ivp(eq.rhs(lam), (eq.x0, eq.L), s0, method="DOP853", rtol=rtol, atol=1e-14 * alpha,
                    t_eval=base.xs, dense_output=dense)
    if sol.status != 0:
        raise StateInvalid(f"mode integration failed: {sol.message}")
    res = ShootingResult(lam, alpha, sol.t, sol.y[2], sol.y[3], float(sol.y[3, -1]), False)
    if dense:
        res._dense = sol.sol
    return res


def find_unstable_mode(base: SubsonicBase, bracket: tuple[float, float] | None = None,
                       n_scan: int = 128, shoot_tol: float = 1e-8, alpha: float = 1.0) -> ModeSearch:
    """Scan the growth-rate bracket for a sign change of Z'(L), then refine it.

    The default bracket is (0, -E(x0)/u(x0)); with E(x0) >= 0 it is empty and
    no mode is reported.
    """
    eq = ModeEquation(base)
    lo, hi = bracket if bracket is not None else (0.0, eq.lam_upper)
    if not hi > lo:
        return ModeSearch(None, np.empty(0), np.empty(0), (lo, hi))
    lams = np.linspace(lo, hi, n_scan)
    slopes = np.array([shoot(base, l, alpha, eq=eq).terminal_slope for l in lams])
    sign = np.sign(slopes)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0.0)[0]
    if idx.size == 0:
        return ModeSearch(None, lams, slopes, (lo, hi))
    i = int(idx[0])

    def f(l):
        return shoot(base, l, alpha, eq=eq).terminal_slope, math.nan

    lam = _bisect(f, lams[i], lams[i + 1], shoot_tol * alpha)
    mode = shoot(base, lam, alpha, eq=eq, dense=True)
    mode.converged = abs(mode.terminal_slope) <= shoot_tol * alpha
    mode.residual = eigen_residual(base, mode, eq)
    return ModeSearch(mode, lams, slopes, (lo, hi))


def _bisect(f, lo, hi, ftol, max_iter=200):
    flo = f(lo)[0]
    if flo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)[0]
        if abs(fm) <= ftol or hi - lo <= 4e-16 * max(1.0, abs(mid)):
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eigen_residual(base: SubsonicBase, mode: ShootingResult, eq: ModeEquation | None = None,
                   n_points: int = 32) -> float:
    """Relative sup residual of the mode equation re-substituted on a finer grid.

    Z is sampled from the dense ODE output on Chebyshev points, interpolated
    and differentiated spectrally; the background comes from the same dense
    output.  The result is normalised by the largest term of the equation.
    Degree 32 resolves the smooth mode; higher degrees only amplify the
    dense-output noise in the second derivative.
    """
    eq = eq or ModeEquation(base)
    n = int(n_points)
    t = np.cos(np.pi * np.arange(n + 1) / n)[::-1]
    x = eq.x0 + 0.5 * (t + 1.0) * (eq.L - eq.x0)
    dense = getattr(mode, "_dense", None)
    if dense is None:
        dense = shoot(base, mode.lam, mode.alpha, eq=eq, dense=True)._dense
    rho, E, Z, _ = dense(x)
    coef = C.chebfit(t, Z, n)
    scale = 2.0 / (eq.L - eq.x0)
    Zx = C.chebval(t, C.chebder(coef)) * scale
    Zxx = C.chebval(t, C.chebder(coef, 2)) * scale ** 2
    r, size = eq.residual(mode.lam, x, Z, Zx, Zxx, rho, E)
    bc0 = Zx[0] - eq.initial_slope_factor(mode.lam) * Z[0]
    bcL = Zx[-1]
    zs = float(np.max(np.abs(Zx)))
    return max(float(np.max(np.abs(r))) / size, abs(bc0) / zs, abs(bcL) / zs)


# ---------------------------------------------------------------------------
# constructing an unstable configuration


@dataclass
class UnstableLength:
    base: SubsonicBase
    L: float
    search: ModeSearch
    E_shock: float
    scanned: list = field(default_factory=list)

    @property
    def mode(self) -> ShootingResult:
        return self.search.mode


def find_unstable_length(law, J: float, b, rho_l: float, E_l: float, x0: float,
                         target_E: float, lengths, n_cells: int = 128,
                         fit_opts: FitOptions | None = None, n_scan: int = 128,
                         shoot_tol: float = 1e-8) -> UnstableLength:
    """Place the shock at x0, then scan total lengths L for the first unstable mode.

    ``target_E`` is the required bound E(x0) < target_E (a negative number).
    ``b`` must be defined on [0, max(lengths)].
    """
    if not target_E < 0.0:
        raise UsageError("target_E must be negative")
    scanned = []
    for L in sorted(float(v) for v in lengths):
        if L <= x0:
            continue
        sol = solution_with_shock_at(law, J, b, rho_l, E_l, L, x0, fit_opts)
        E_shock = float(sol.right.E[0])
        if not E_shock < target_E:
            raise UsageError(f"field at the shock {E_shock:.4g} does not reach {target_E:.4g}; "
                             "lower E_l")
        base = SubsonicBase(sol, n_cells)
        search = find_unstable_mode(base, n_scan=n_scan, shoot_tol=shoot_tol)
        scanned.append((L, search.found))
        logger.info("L=%.6g E(x0)=%.6g mode=%s", L, E_shock, search.found)
        if search.found and search.mode.converged:
            return UnstableLength(base, L, search, E_shock, scanned)
    raise NoModeFound(f"no unstable mode for L in {[s[0] for s in scanned]}", scanned)


def mode_initial_data(base: SubsonicBase, mode: ShootingResult) -> tuple[np.ndarray, np.ndarray]:
    """(Y, Y_t) = (Z, lambda Z) on the base grid."""
    Z = np.interp(base.xs, mode.x, mode.Z)
    return Z, mode.lam * Z


def growth_rate_from_trace(t: np.ndarray, y: np.ndarray) -> float:
    """Average exponential rate log(y(T)/y(0))/T of a positive trace."""
    if y[0] == 0.0 or y[-1] / y[0] <= 0.0:
        raise NoModeFound("trace changes sign; no exponential growth")
    return math.log(y[-1] / y[0]) / (t[-1] - t[0])
