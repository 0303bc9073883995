"""Nonlinear free-boundary evolution of the subsonic region behind the shock.

The potential Y = E_+ - Ebar_+ satisfies, in physical coordinates,

    Y_tt - d/dx[F(rho+Y_x, J-Y_t) - F(rho, J)] + E Y_x + rho Y + Y Y_x = 0,
    F(rho, J) = p(rho) + J^2/rho,

with the shock at s(t) = x0 + sigma(t).  The moving interval [s, L] is mapped
onto [x0, L] by x = xt + sigma (L - xt)/(L - x0).  We carry Yf(t, xt) (the
composed potential) and P = Y_t at the physical point, so that

    Yf_t = P + q1 sigma' Yf_xt,
    P_t  = q1 sigma' P_xt + q2 d/dxt G + S,

with q1 = (L - xt)/(L - x0 - sigma), q2 = (L - x0)/(L - x0 - sigma).  This
first-order form needs sigma' only, never sigma''.  The discretization is the
linear energy-exact scheme plus a remainder that vanishes to second order, so
the linearization of one step equals one step of the linear scheme.

At the shock, sigma = A3(Y(x0)) (field continuity) and the physical slope
Y_x(x0) solves the momentum jump condition for the given P(x0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial.legendre import leggauss

from .base import SubsonicBase
from .errors import BoundarySolverError, SolverFailure, StateInvalid, UsageError
from .fitter import TransonicSolution
from .linear import LinearOperator, _slope_left, _slope_right, divergence, sbp_derivative
from .roots import damped_newton

logger = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = leggauss(12)


def build_base(solution: TransonicSolution, n_cells: int = 100) -> SubsonicBase:
    return SubsonicBase(solution, n_cells)


@dataclass(frozen=True)
class Transform:
    """Map between the moving subsonic interval and the fixed one."""

    x0: float
    L: float

    @property
    def length(self) -> float:
        return self.L - self.x0

    def q1(self, xt, sigma):
        return (self.L - np.asarray(xt, dtype=float)) / (self.length - sigma)

    def q2(self, sigma):
        return self.length / (self.length - sigma)

    def physical(self, xt, sigma):
        xt = np.asarray(xt, dtype=float)
        if sigma == 0.0:
            return xt
        return xt + sigma * (self.L - xt) / self.length


@dataclass
class PerturbationState:
    """Yf on the fixed grid, Yt = physical time derivative P, and the shock shift."""

    t: float
    Y: np.ndarray
    Yt: np.ndarray
    sigma: float = 0.0
    sigma_dot: float = 0.0


@dataclass
class DynamicsOptions:
    cfl: float = 0.5
    viscosity: float = 1.0
    boundary_tol: float = 1e-12
    wave_only: bool = False  # test hook: leading-order wave part only
    blowup_factor: float = 1e3
    sample_dt: float = 0.05


class _Cheb:
    """Chebyshev interpolant on [lo, hi] evaluated by a scalar Clenshaw recurrence."""

    def __init__(self, f, lo, hi, deg=32):
        self.c = list(Chebyshev.interpolate(f, deg, domain=[lo, hi]).coef)
        self.mid, self.half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def __call__(self, x: float) -> float:
        z = (x - self.mid) / self.half
        b1 = b2 = 0.0
        for c in reversed(self.c[1:]):
            b1, b2 = 2.0 * z * b1 - b2 + c, b1
        return z * b1 - b2 + self.c[0]


class ShockRelations:
    """Exact shock relations with the supersonic side frozen at its steady profile.

    Quantities that depend on the shock displacement alone are tabulated once
    as Chebyshev interpolants in sigma.  Integrals are stored as sigma times
    the mean integrand, so they keep full relative accuracy as sigma -> 0.
    """

    def __init__(self, base: SubsonicBase, deg: int = 32):
        self.base = base
        self.law, self.J = base.law, base.J
        self.x0 = base.x0
        lo, hi = base.sigma_min, base.sigma_max
        self.rho_plus = _Cheb(lambda s: base.plus(self.x0 + s)[0], lo, hi, deg)
        self.rho_minus = _Cheb(lambda s: base.minus(self.x0 + s)[0], lo, hi, deg)
        self._field_mean = _Cheb(lambda s: self._mean(self._field_integrand, s), lo, hi, deg)
        self._flux_mean = _Cheb(lambda s: self._mean(self._flux_integrand, s), lo, hi, deg)
        self._dA3 = float(base.response_coefficients().dA3_dY)

    def _field_integrand(self, x):
        return self.base.minus(x)[0] - self.base.plus(x)[0]

    def _flux_integrand(self, x):
        rp, ep = self.base.plus(x)
        rm, em = self.base.minus(x)
        return rp * ep - rm * em

    def _mean(self, f, sigma):
        """Mean of f over [x0, x0 + sigma] by Gauss-Legendre (sigma may be an array)."""
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        xs = self.x0 + 0.5 * np.outer(sigma, _GL_NODES + 1.0)
        vals = f(xs.ravel()).reshape(xs.shape)
        return 0.5 * vals @ _GL_WEIGHTS

    def _check(self, sigma):
        b = self.base
        if not b.sigma_min <= sigma <= b.sigma_max:
            raise StateInvalid(f"shock displacement {sigma:.4g} leaves the tabulated range "
                               f"[{b.sigma_min:.4g}, {b.sigma_max:.4g}]")

    def field_gap(self, sigma: float) -> float:
        """Ebar_-(x0+sigma) - Ebar_+(x0+sigma) as an integral of rho_- - rho_+ (b cancels)."""
        self._check(sigma)
        return sigma * self._field_mean(sigma)

    def flux_gap(self, sigma: float) -> float:
        """Fbar_+(x0+sigma) - Fbar_-(x0+sigma); dF/dx = rho*E along each branch."""
        self._check(sigma)
        return sigma * self._flux_mean(sigma)

    def field_gap_direct(self, sigma: float) -> float:
        """Quadrature of the same integral straight from the branches (reference route)."""
        return float(sigma * self._mean(self._field_integrand, sigma)[0])

    def A3(self, Y0: float) -> float:
        """Shock displacement from the potential at the shock (field continuity)."""
        if Y0 == 0.0:
            return 0.0

        def f(s):
            self._check(s)
            return self.field_gap(s) - Y0, self.rho_minus(s) - self.rho_plus(s)

        try:
            return damped_newton(f, Y0 * self._dA3, tol=1e-15, scale=abs(Y0))
        except SolverFailure as exc:
            raise BoundarySolverError(f"shock position solve failed for Y0={Y0:.4g}") from exc

    def _side(self, sigma):
        self._check(sigma)
        return self.rho_plus(sigma), self.rho_minus(sigma)

    def momentum_defect(self, y: float, P: float, sigma: float, rp: float, rm: float, dF: float):
        """(F(rp+y, J-P) - F_-) - P^2/(rp+y-rm) and its y-derivative."""
        law, J = self.law, self.J
        a = float(law.dp(rp)) - J * J / rp ** 2
        u = J / rp
        r = rp + y
        jump = r - rm
        if r <= 0.0 or jump <= 0.0:
            raise StateInvalid(f"inadmissible shock state (rho_+={r:.4g}, jump={jump:.4g})")
        w = J * y / rp + P
        rem = float(law.remainder(rp, y)) + w * w / r
        val = a * y - 2.0 * u * P + rem + dF - P * P / jump
        drem = float(law.dp(r) - law.dp(rp)) + 2.0 * w * (J / rp) / r - w * w / r ** 2
        return val, a + drem + P * P / jump ** 2

    def boundary_slope(self, P0: float, sigma: float, tol: float = 1e-12) -> float:
        """Physical Y_x at the shock from the momentum jump condition."""
        rp, rm = self._side(sigma)
        dF = self.flux_gap(sigma)
        a = float(self.law.dp(rp)) - self.J ** 2 / rp ** 2
        guess = (2.0 * self.J / rp * P0 - dF) / a
        scale = abs(a * guess) + abs(P0) + abs(dF)
        if scale == 0.0:
            return 0.0
        try:
            return damped_newton(lambda y: self.momentum_defect(y, P0, sigma, rp, rm, dF), guess,
                                 tol=tol * 1e-3, scale=scale)
        except SolverFailure as exc:
            raise BoundarySolverError(f"boundary Newton failed (P0={P0:.4g}, sigma={sigma:.4g})") from exc

    def A1(self, y: float, sigma: float) -> float:
        """J_+ - Jbar from the momentum jump, given rho_+ - rhobar_+(s) = y."""
        rp, rm = self._side(sigma)
        dF = self.flux_gap(sigma)
        J = self.J
        a = float(self.law.dp(rp)) - J * J / rp ** 2

        # unknown j = J_+ - Jbar, i.e. P = -j in momentum_defect
        def f(j):
            v, _ = self.momentum_defect(y, -j, sigma, rp, rm, dF)
            r = rp + y
            w = J * y / rp - j
            dv = 2.0 * J / rp - 2.0 * w / r - 2.0 * j / (r - rm)
            return v, dv

        guess = -(a * y + dF) / (2.0 * J / rp)
        scale = abs(a * y) + abs(dF)
        if scale == 0.0:
            return 0.0
        return damped_newton(f, guess, tol=1e-15, scale=scale)

    def A2(self, y: float, sigma: float) -> float:
        """Shock speed [rho u]/[rho]."""
        rp, rm = self._side(sigma)
        return self.A1(y, sigma) / (rp + y - rm)

    def A4(self, yx: float, Y0: float) -> float:
        """Y_t at the shock in terms of (Y_x, Y) there."""
        return -self.A1(yx, self.A3(Y0))

    def shock_speed(self, y: float, P0: float, sigma: float) -> float:
        rp, rm = self._side(sigma)
        return -P0 / (rp + y - rm)


class SubsonicDynamics:
    """Right-hand side and stepping of the nonlinear free-boundary problem."""

    def __init__(self, base: SubsonicBase, opts: DynamicsOptions | None = None):
        self.base = base
        self.opts = opts or DynamicsOptions()
        self.linear = LinearOperator(base, self.opts.viscosity)
        self.shock = ShockRelations(base)
        self.transform = Transform(base.x0, base.L)
        self.law, self.J = base.law, base.J
        self.h = base.h
        self.hd = self.linear.hd
        self.n = base.n
        self.last = {}

    # ------------------------------------------------------------------
    def nonlinear_flux(self, Yt, Yx, x):
        """p(rho+Y_x) + (J-Y_t)^2/(rho+Y_x) at physical positions x."""
        rho = self.base.plus(x)[0]
        r = rho + np.asarray(Yx, dtype=float)
        if np.any(r <= 0.0):
            raise StateInvalid("vacuum: rhobar_+ + Y_x <= 0")
        return self.law.p(r) + (self.J - np.asarray(Yt, dtype=float)) ** 2 / r

    def flux_increment(self, rho, Yx, P):
        """F(rho+Y_x, J-P) - F(rho, J), split into linear part and cancellation-free remainder."""
        J = self.J
        r = rho + Yx
        if np.any(r <= 0.0):
            raise StateInvalid("vacuum: rhobar_+ + Y_x <= 0")
        a = self.law.dp(rho) - J * J / rho ** 2
        w = J * Yx / rho + P
        return a * Yx - 2.0 * J / rho * P + self.law.remainder(rho, Yx) + w * w / r

    def boundary_state(self, Y0: float, P0: float):
        """(sigma, physical slope at the shock, sigma')."""
        sigma = self.shock.A3(Y0)
        yx = self.shock.boundary_slope(P0, sigma, self.opts.boundary_tol)
        return sigma, yx, self.shock.shock_speed(yx, P0, sigma)

    def rhs(self, Y, P):
        if self.opts.wave_only:
            return self._wave_rhs(Y, P)
        b, h = self.base, self.h
        sigma, yx_b, sdot = self.boundary_state(float(Y[0]), float(P[0]))
        q2 = self.transform.q2(sigma)
        q1 = self.transform.q1(b.xs, sigma)
        xn = self.transform.physical(b.xs, sigma)
        xm = self.transform.physical(b.xm, sigma)
        rho_all, E_all = b.plus.unchecked(np.concatenate([xn, xm]))
        rho_n, E_n, rho_m = rho_all[:b.n + 1], E_all[:b.n + 1], rho_all[b.n + 1:]
        beta = yx_b / q2  # slope in the fixed coordinate

        # nodal slopes with the boundary values imposed
        Yx_fix = sbp_derivative(Y, h)
        Yx_fix[0], Yx_fix[-1] = beta, 0.0
        Yx_phys = q2 * Yx_fix
        if np.any(self.gap(rho_m + q2 * np.diff(Y) / h) <= 0.0) or \
                np.any(self.gap(rho_n + Yx_phys) <= 0.0):
            raise StateInvalid("perturbed state left the subsonic regime")

        # conservative remainder q2*dG_full - dG_lin at midpoints and ends
        P_mid = 0.5 * (P[1:] + P[:-1])
        G_full = self.flux_increment(rho_m, q2 * np.diff(Y) / h, P_mid)
        G_lin = b.a_mid * np.diff(Y) / h - 2.0 * b.u_mid * P_mid
        G0_full = self.flux_increment(rho_n[0], yx_b, P[0])
        G0_lin = b.a[0] * beta - 2.0 * b.u[0] * P[0]
        GN_full = self.flux_increment(rho_n[-1], 0.0, P[-1])
        GN_lin = -2.0 * b.u[-1] * P[-1]
        R = divergence(q2 * G_full - G_lin, q2 * G0_full - G0_lin, q2 * GN_full - GN_lin, self.hd)

        S_full = -E_n * Yx_phys - rho_n * Y - Y * Yx_phys
        S_lin = -b.E * Yx_fix - b.rho * Y
        transport = q1 * sdot
        _, V_lin = self.linear.apply(Y, P, beta=beta)
        Yt = P + transport * Yx_fix
        Pt = V_lin + R + (S_full - S_lin) + transport * sbp_derivative(P, h)
        self.last = {"sigma": sigma, "sigma_dot": sdot, "yx_b": yx_b}
        return Yt, Pt

    def gap(self, rho):
        return self.law.dp(rho) - self.J ** 2 / rho ** 2

    def _wave_rhs(self, Y, P):
        b, h = self.base, self.h
        G = self.flux_increment(b.rho_mid, np.diff(Y) / h, 0.0)
        self.last = {"sigma": 0.0, "sigma_dot": 0.0, "yx_b": 0.0}
        return P.copy(), divergence(G, 0.0, 0.0, self.hd)

    # ------------------------------------------------------------------
    def stable_dt(self) -> float:
        return self.linear.stable_dt(self.opts.cfl)

    def state_from(self, t, Y, P) -> PerturbationState:
        if self.opts.wave_only:
            return PerturbationState(t, Y, P, 0.0, 0.0)
        sigma, yx, sdot = self.boundary_state(float(Y[0]), float(P[0]))
        return PerturbationState(t, Y, P, sigma, sdot)

    def project(self, Y, P) -> np.ndarray:
        """Adjust Y near both ends so its one-sided slopes satisfy the boundary relations."""
        b, h = self.base, self.h
        Y = np.asarray(Y, dtype=float).copy()
        P = np.asarray(P, dtype=float)
        w = 0.1 * b.length
        s = (b.xs - b.x0) / w
        left_bump = w * s * np.exp(-s * s)
        r = (b.L - b.xs) / w
        right_bump = -w * r * np.exp(-r * r)
        sigma, yx_b, _ = self.boundary_state(float(Y[0]), float(P[0]))
        beta = yx_b / self.transform.q2(sigma)
        unit0, unitL = _slope_left(left_bump, h), _slope_right(right_bump, h)
        for _ in range(2):
            Y += (beta - _slope_left(Y, h)) / unit0 * left_bump - _slope_right(Y, h) / unitL * right_bump
        return Y


def step(state: PerturbationState, dt: float, dyn: SubsonicDynamics) -> PerturbationState:
    """One classical Runge-Kutta step of the semi-discrete nonlinear system."""
    limit = dyn.stable_dt()
    if abs(dt) > limit * (1.0 + 1e-12):
        raise UsageError(f"|dt|={abs(dt):.4g} exceeds the CFL bound {limit:.4g}")
    Y, P = state.Y, state.Yt
    k1 = dyn.rhs(Y, P)
    k2 = dyn.rhs(Y + 0.5 * dt * k1[0], P + 0.5 * dt * k1[1])
    k3 = dyn.rhs(Y + 0.5 * dt * k2[0], P + 0.5 * dt * k2[1])
    k4 = dyn.rhs(Y + dt * k3[0], P + dt * k3[1])
    Yn = Y + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    Pn = P + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return dyn.state_from(state.t + dt, Yn, Pn)


# ---------------------------------------------------------------------------
# long runs


TRAJECTORY_HEADER = ["t", "sup_Y", "sup_Yt", "sup_Yx", "sigma", "sigma_dot", "phi0"]


@dataclass
class EvolutionResult:
    trajectory: np.ndarray  # rows of TRAJECTORY_HEADER
    lambda_fit: float
    r_squared: float
    blowup: bool
    final: PerturbationState
    dt: float
    slaving_error: float
    snapshots: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.trajectory[:, 0]

    def column(self, name: str) -> np.ndarray:
        return self.trajectory[:, TRAJECTORY_HEADER.index(name)]


def fit_log_decay(t: np.ndarray, amp: np.ndarray, tail: float = 0.5) -> tuple[float, float]:
    """Least-squares rate of log(amp) ~ c - lambda t over the tail; (nan, nan) if amp vanishes."""
    keep = t >= t[0] + (1.0 - tail) * (t[-1] - t[0]) - 1e-12
    t, amp = t[keep], amp[keep]
    if t.size < 2 or np.any(amp <= 0.0):
        return math.nan, math.nan
    y = np.log(amp)
    slope, icpt = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - slope * t - icpt) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(-slope), (1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def evolve_and_measure(initial: PerturbationState, T_final: float, dyn: SubsonicDynamics,
                       dt: float | None = None, snapshot_times=(), project: bool = True) -> EvolutionResult:
    """Run to ``T_final`` recording sup-norms, the shock shift and the linear energy."""
    sample_dt = min(dyn.opts.sample_dt, T_final)
    dt_max = dyn.stable_dt()
    per_sample = max(1, int(math.ceil(sample_dt / (dt or dt_max) - 1e-9)))
    dt = sample_dt / per_sample
    n_samples = int(round(T_final / sample_dt))
    Y = dyn.project(initial.Y, initial.Yt) if project and not dyn.opts.wave_only else initial.Y.copy()
    state = dyn.state_from(initial.t, Y, initial.Yt.copy())
    lin = dyn.linear
    h = dyn.h
    snaps = {}
    wanted = sorted(float(s) for s in snapshot_times)

    def row(s: PerturbationState):
        yx = sbp_derivative(s.Y, h)
        return [s.t, float(np.max(np.abs(s.Y))), float(np.max(np.abs(s.Yt))),
                float(np.max(np.abs(yx))), s.sigma, s.sigma_dot, lin.energy(s.Y, s.Yt)]

    rows = [row(state)]
    sup0 = rows[0][1] + abs(rows[0][4])
    slaving = 0.0
    blowup = False
    for _ in range(n_samples):
        for _ in range(per_sample):
            state = step(state, dt, dyn)
        rows.append(row(state))
        if not dyn.opts.wave_only:
            slaving = max(slaving, abs(state.sigma - dyn.shock.A3(float(state.Y[0]))))
        while wanted and state.t >= wanted[0] - 0.5 * dt:
            snaps[wanted.pop(0)] = state.Y.copy()
        if sup0 > 0.0 and rows[-1][1] + abs(rows[-1][4]) > dyn.opts.blowup_factor * sup0:
            blowup = True
            logger.info("growth beyond %.0e x initial at t=%.4g", dyn.opts.blowup_factor, state.t)
            break
    traj = np.asarray(rows)
    amp = traj[:, 1] + np.abs(traj[:, 4])
    lam, r2 = fit_log_decay(traj[:, 0], amp)
    return EvolutionResult(traj, lam, r2, blowup, state, dt, slaving, snaps)


def bump_initial(base: SubsonicBase, amplitude: float) -> PerturbationState:
    """Smooth data with Y(x0) = amplitude, flat at both ends, zero velocity."""
    s = (base.xs - base.x0) / base.length
    Y = amplitude * 0.5 * (1.0 + np.cos(np.pi * s))
    return PerturbationState(0.0, Y, np.zeros_like(Y))
