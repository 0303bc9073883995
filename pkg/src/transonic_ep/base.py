"""Background tables for the subsonic region behind a steady shock.

Both steady branches are extended a little past the shock (the subsonic one
backwards, the supersonic one forwards) so that the moving shock can sample
them at ``x0 + sigma`` for either sign of the displacement.  All evaluations
go through cubic Hermite interpolants built from the ODE samples and their
exact slopes, so the grid tables and shifted evaluations agree bit-for-bit
at ``sigma = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .eos import FlowPoint
from .errors import SonicSingularity, UsageError
from .fitter import TransonicSolution
from .steady import IntegrateOptions, integrate


@dataclass(frozen=True)
class ShockResponseCoefficients:
    """Linear response of the shock relations at the base shock position."""

    dA1_drho: float
    dA1_dshift: float
    dA2_drho: float
    dA2_dshift: float
    dA3_dY: float
    dA4_dYx: float
    dA4_dY: float
    d1_0: float
    e1_0: float


class _Branch:
    """Hermite evaluator of (rho, E) built from samples with exact slopes."""

    def __init__(self, xs, rho, E, law, J, b):
        self.lo, self.hi = float(xs[0]), float(xs[-1])
        self.law, self.J = law, J
        drho = rho * E / (law.dp(rho) - J * J / rho ** 2)
        dE = rho - np.asarray(b(xs), dtype=float)
        self.rho = CubicHermiteSpline(xs, rho, drho, extrapolate=False)
        self.E = CubicHermiteSpline(xs, E, dE, extrapolate=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo - 1e-15) or np.any(x > self.hi + 1e-15):
            raise UsageError(f"position outside the tabulated branch [{self.lo}, {self.hi}]")
        x = np.clip(x, self.lo, self.hi)
        return self.rho(x), self.E(x)

    def unchecked(self, x):
        """Evaluation without range checks, for callers that already validated x."""
        return self.rho(x), self.E(x)


def _join(a: tuple, b: tuple):
    xs = np.concatenate([a[0], b[0][1:]])
    return xs, np.concatenate([a[1], b[1][1:]]), np.concatenate([a[2], b[2][1:]])


class SubsonicBase:
    """Grid tables on [x0, L] plus shifted-branch evaluators for the free boundary."""

    def __init__(self, solution: TransonicSolution, n_cells: int = 200, margin: float | None = None):
        if n_cells < 64:
            raise UsageError("the subsonic grid needs at least 64 cells")
        self.solution = solution
        self.law, self.J, self.b = solution.law, solution.J, solution.b
        self.x0, self.L = solution.x0, solution.L
        self.length = self.L - self.x0
        self.n = int(n_cells)
        self.xs = np.linspace(self.x0, self.L, self.n + 1)
        self.h = self.length / self.n
        self.margin = 0.1 * min(self.length, self.x0) if margin is None else float(margin)

        right = solution.right
        io = IntegrateOptions(tol=1e-12)
        ext = self._extend(right.rho[0], right.E[0], self.x0, self.x0 - self.margin, io)
        sub = _join((ext.xs, ext.rho, ext.E), (right.xs, right.rho, right.E))
        self.plus = _Branch(*sub, self.law, self.J, self.b)

        left = solution.left
        hi = min(self.x0 + self.margin, self.L)
        n_ext = max(64, int(math.ceil((hi - self.x0) / 2.5e-4)) + 1)
        xe = np.linspace(self.x0, hi, n_ext)
        if left.dense is not None and hi > self.x0:
            re, ee = left.dense(xe)
            sup = _join((left.xs, left.rho, left.E), (xe, re, ee))
        else:
            sup = (left.xs, left.rho, left.E)
        self.minus = _Branch(*sup, self.law, self.J, self.b)
        self.sigma_min = self.plus.lo - self.x0
        self.sigma_max = self.minus.hi - self.x0
        self._tables()

    def _extend(self, rho0, E0, x_from, x_to, io):
        try:
            return integrate(self.law, self.J, self.b, x_from, x_to, FlowPoint(rho0, E0, self.J), io)
        except SonicSingularity as exc:
            x_to = x_from - 0.5 * (x_from - exc.x)
            return integrate(self.law, self.J, self.b, x_from, x_to, FlowPoint(rho0, E0, self.J), io)

    # ------------------------------------------------------------------
    def profile(self, x):
        """(rho, E, rho') of the subsonic background at physical positions."""
        rho, E = self.plus(x)
        return rho, E, rho * E / self.gap(rho)

    def gap(self, rho):
        return self.law.dp(rho) - self.J ** 2 / rho ** 2

    def flux(self, rho, J):
        return self.law.p(rho) + J * J / rho

    def _tables(self):
        xs = self.xs
        xm = 0.5 * (xs[1:] + xs[:-1])
        self.rho, self.E, self.drho = self.profile(xs)
        self.rho_mid, self.E_mid, _ = self.profile(xm)
        self.xm = xm
        self.u = self.J / self.rho
        self.c2 = self.law.dp(self.rho)
        self.a = self.c2 - self.u ** 2  # = p' - J^2/rho^2 > 0 (subsonic)
        self.a_mid = self.gap(self.rho_mid)
        self.u_mid = self.J / self.rho_mid
        self.A_mid = self.a_mid / self.rho_mid
        self.A = self.a / self.rho
        self.F = self.flux(self.rho, self.J)
        self.F_mid = self.flux(self.rho_mid, self.J)
        self.wave_speed = float(np.max(self.u + np.sqrt(self.c2)))
        self.rho_minus0, self.E_minus0 = (float(v) for v in self.minus(self.x0))

    # coefficient tables of the linearized operator --------------------
    def coefficient_tables(self) -> dict:
        rho, rp, E, J = self.rho, self.drho, self.E, self.J
        a11 = -self.a
        da = (self.law.d2p(rho) + 2.0 * J * J / rho ** 3) * rp
        return {
            "x": self.xs,
            "a00": np.ones_like(rho),
            "a01": self.u.copy(),
            "a10": self.u.copy(),
            "a11": a11,
            "b0": -2.0 * J * rp / rho ** 2,
            "b1": -da + E,
            "g": rho.copy(),
            # pieces needed for the two structural identities
            "d_a01_over_rho": -2.0 * J * rp / rho ** 3,
            "d_a11_over_rho": -da / rho + self.a * rp / rho ** 2,
        }

    @property
    def E_shock(self) -> float:
        return float(self.E[0])

    @property
    def u_shock(self) -> float:
        return float(self.u[0])

    def response_coefficients(self) -> ShockResponseCoefficients:
        a, u, E = float(self.a[0]), float(self.u[0]), float(self.E[0])
        jump = float(self.rho[0]) - self.rho_minus0
        return ShockResponseCoefficients(
            dA1_drho=-a / (2.0 * u),
            dA1_dshift=-jump * E / (2.0 * u),
            dA2_drho=-a / (2.0 * u * jump),
            dA2_dshift=-E / (2.0 * u),
            dA3_dY=1.0 / (self.rho_minus0 - float(self.rho[0])),
            dA4_dYx=a / (2.0 * u),
            dA4_dY=-E / (2.0 * u),
            d1_0=2.0 * u / a,
            e1_0=E / a,
        )
