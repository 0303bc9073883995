"""Steady field system (rho, E)' on sub-intervals with a sonic guard.

The steady flow with constant mass flux J obeys

    rho' = rho*E / (p'(rho) - J^2/rho^2),    E' = rho - b(x),

which is singular at the sonic density.  Integration stops before the
trajectory enters a thin band around the sonic state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .eos import FlowPoint, PressureLaw, Regime, regime, sonic_density
from .errors import SolverFailure, SonicSingularity, UsageError


# ---------------------------------------------------------------------------
# background charge


@dataclass(frozen=True)
class BackgroundCharge:
    """Background ion density b(x) on [0, L].

    ``spec`` is a plain-data description (used for manifests and
    perturbation); ``func`` is the vectorised evaluator built from it.
    """

    spec: dict
    L: float
    func: Callable = field(repr=False, compare=False)

    def __call__(self, x):
        return self.func(x)

    # constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, L: float) -> "BackgroundCharge":
        return cls.from_spec({"kind": "constant", "value": float(value)}, L)

    @classmethod
    def from_samples(cls, xs, values, L: float | None = None) -> "BackgroundCharge":
        xs = [float(v) for v in xs]
        values = [float(v) for v in values]
        return cls.from_spec({"kind": "samples", "x": xs, "values": values}, xs[-1] if L is None else L)

    @classmethod
    def from_spec(cls, spec: dict, L: float) -> "BackgroundCharge":
        return cls(dict(spec), float(L), _build_func(spec, float(L)))

    # queries -----------------------------------------------------------
    def sample(self, n: int = 2049) -> tuple[np.ndarray, np.ndarray]:
        xs = np.linspace(0.0, self.L, n)
        return xs, np.asarray(self(xs), dtype=float) * np.ones_like(xs)

    def min(self) -> float:
        return float(np.min(self.sample()[1]))

    def max(self) -> float:
        return float(np.max(self.sample()[1]))

    def perturbed(self, shape: str, eps: float, **params) -> "BackgroundCharge":
        """Return b + eps*shape with sup-norm of the added term equal to |eps|."""
        term = {"kind": shape, "amplitude": float(eps), **params}
        if self.spec.get("kind") == "sum":
            terms = list(self.spec["terms"]) + [term]
        else:
            terms = [self.spec, term]
        return BackgroundCharge.from_spec({"kind": "sum", "terms": terms}, self.L)


def _build_func(spec: dict, L: float) -> Callable:
    kind = spec.get("kind")
    if kind == "constant":
        v = float(spec["value"])
        return lambda x: v + 0.0 * np.asarray(x, dtype=float)
    if kind == "polynomial":
        coeffs = [float(c) for c in spec["coefficients"]]  # ascending powers
        return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)
    if kind == "fourier":
        a0 = float(spec.get("a0", 0.0))
        cos_c = [float(c) for c in spec.get("cos", [])]
        sin_c = [float(c) for c in spec.get("sin", [])]
        period = float(spec.get("period", L))

        def fourier(x):
            x = np.asarray(x, dtype=float)
            out = a0 + 0.0 * x
            for n, c in enumerate(cos_c, start=1):
                out = out + c * np.cos(2.0 * math.pi * n * x / period)
            for n, s in enumerate(sin_c, start=1):
                out = out + s * np.sin(2.0 * math.pi * n * x / period)
            return out

        return fourier
    if kind == "samples":
        xs = np.asarray(spec["x"], dtype=float)
        vs = np.asarray(spec["values"], dtype=float)
        if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise UsageError("sampled background needs >= 2 strictly increasing positions")
        return lambda x: np.interp(np.asarray(x, dtype=float), xs, vs)
    # perturbation shapes; each has sup-norm |amplitude| on [0, L]
    if kind == "offset":
        a = float(spec["amplitude"])
        return lambda x: a + 0.0 * np.asarray(x, dtype=float)
    if kind == "bump":
        a = float(spec["amplitude"])
        c = float(spec.get("center", 0.5 * L))
        w = float(spec.get("width", 0.15 * L))
        return lambda x: a * np.exp(-(((np.asarray(x, dtype=float) - c) / w) ** 2))
    if kind == "sinusoid":
        a = float(spec["amplitude"])
        m = int(spec.get("mode", 1))
        return lambda x: a * np.sin(2.0 * math.pi * m * np.asarray(x, dtype=float) / L)
    if kind == "sum":
        funcs = [_build_func(t, L) for t in spec["terms"]]
        return lambda x: sum(f(x) for f in funcs)
    raise UsageError(f"unknown background charge kind {kind!r}")


# ---------------------------------------------------------------------------
# right-hand side


def sonic_gap(law: PressureLaw, J: float, rho):
    """p'(rho) - J^2/rho^2; negative supersonic, positive subsonic."""
    return law.dp(rho) - J * J / (rho * rho)


def rhs(law: PressureLaw, J: float, b_at_x: float, point: FlowPoint, x: float = math.nan,
        tol_sonic: float = 1e-8) -> tuple[float, float]:
    """Steady field derivatives (drho/dx, dE/dx) at one point.

    Raises :class:`SonicSingularity` inside the band
    ``|p'(rho) - J^2/rho^2| < tol_sonic * p'(rho_s)``.
    """
    gap = sonic_gap(law, J, point.rho)
    rho_s = sonic_density(law, J)
    if abs(gap) < tol_sonic * law.dp(rho_s):
        raise SonicSingularity(f"sonic band entered at x={x}", x)
    return point.rho * point.E / gap, point.rho - b_at_x


def drho_dx(law: PressureLaw, J: float, rho, E):
    return rho * E / sonic_gap(law, J, rho)


# ---------------------------------------------------------------------------
# profiles


@dataclass
class IntegrateOptions:
    tol: float = 1e-10
    tol_sonic: float = 1e-8
    max_dx: float = 2.5e-4
    min_points: int = 257
    method: str = "DOP853"
    xs: np.ndarray | None = None


@dataclass
class SteadyProfile:
    """Sampled steady solution on one smooth sub-interval."""

    xs: np.ndarray
    rho: np.ndarray
    E: np.ndarray
    J: float
    regime: Regime
    law: PressureLaw
    b: BackgroundCharge
    dense: Callable | None = field(default=None, repr=False)

    @property
    def u(self) -> np.ndarray:
        return self.J / self.rho

    @property
    def mach(self) -> np.ndarray:
        return self.u / self.law.sound_speed(self.rho)

    @property
    def drho(self) -> np.ndarray:
        """rho' from the ODE right-hand side (no differencing)."""
        return drho_dx(self.law, self.J, self.rho, self.E)

    def at(self, x):
        """(rho, E) at arbitrary x inside the profile interval."""
        if self.dense is None:
            return np.interp(x, self.xs, self.rho), np.interp(x, self.xs, self.E)
        y = self.dense(np.asarray(x, dtype=float))
        return y[0], y[1]

    def hermite(self) -> tuple[CubicHermiteSpline, CubicHermiteSpline]:
        """Piecewise-cubic Hermite interpolants for rho and E using exact slopes."""
        r = CubicHermiteSpline(self.xs, self.rho, self.drho)
        e = CubicHermiteSpline(self.xs, self.E, self.rho - np.asarray(self.b(self.xs), dtype=float))
        return r, e

    def poisson_residual(self) -> float:
        """|E(end) - E(start) - trapz(rho - b)| on the output grid."""
        f = self.rho - self.b(self.xs)
        integral = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(self.xs)))
        return abs(self.E[-1] - self.E[0] - integral)

    def to_csv_rows(self):
        return np.column_stack([self.xs, self.rho, self.E, self.u, self.mach])


def _output_grid(a: float, c: float, opts: IntegrateOptions) -> np.ndarray:
    if opts.xs is not None:
        return np.asarray(opts.xs, dtype=float)
    n = max(opts.min_points, int(math.ceil(abs(c - a) / opts.max_dx)) + 1)
    return np.linspace(a, c, n)


def integrate(law: PressureLaw, J: float, b: BackgroundCharge, from_x: float, to_x: float,
              initial: FlowPoint, opts: IntegrateOptions | None = None) -> SteadyProfile:
    """Integrate the steady system from ``from_x`` to ``to_x``.

    ``to_x < from_x`` integrates backwards (used to extend a profile past
    the shock); the returned grid is always increasing.
    """
    opts = opts or IntegrateOptions()
    if from_x == to_x:
        raise UsageError("empty integration interval")
    rho_s = sonic_density(law, J)
    band = opts.tol_sonic * float(law.dp(rho_s))
    reg = regime(law, FlowPoint(initial.rho, initial.E, J), opts.tol_sonic * rho_s)
    if reg is Regime.SONIC or abs(sonic_gap(law, J, initial.rho)) < band:
        raise SonicSingularity("initial state lies in the sonic band", from_x)
    sign = 1.0 if reg is Regime.SUBSONIC else -1.0

    def f(x, y):
        rho, E = y
        return [rho * E / sonic_gap(law, J, rho), rho - b(x)]

    def sonic_event(x, y):
        # crosses zero when the trajectory enters the sonic band
        return sign * sonic_gap(law, J, y[0]) - band

    sonic_event.terminal = True

    def vacuum_event(x, y):
        return y[0] - 1e-12

    vacuum_event.terminal = True

    grid = _output_grid(from_x, to_x, opts)
    if grid[0] != from_x or grid[-1] != to_x:
        raise UsageError("output grid must start at from_x and end at to_x")
    sol = solve_ivp(f, (from_x, to_x), [initial.rho, initial.E], method=opts.method,
                    rtol=opts.tol, atol=opts.tol * 1e-2, dense_output=True,
                    events=[sonic_event, vacuum_event])
    if sol.status == 1:
        hit = sol.t_events[0]
        xb = float(hit[0]) if len(hit) else float(sol.t[-1])
        if len(hit):
            raise SonicSingularity(f"trajectory entered the sonic band at x={xb:.12g}", xb)
        raise SolverFailure(f"vacuum reached at x={xb:.12g}")
    if sol.status != 0:
        # the slope blows up like 1/gap, so step-size failure can precede the band event
        last_gap = abs(sonic_gap(law, J, sol.y[0, -1]))
        if last_gap < 1e-3 * float(law.dp(rho_s)):
            xb = float(sol.t[-1])
            raise SonicSingularity(f"trajectory stalled next to the sonic state at x={xb:.12g}", xb)
        raise SolverFailure(f"steady integration failed: {sol.message}")
    ys = sol.sol(grid)
    if to_x < from_x:
        grid, ys = grid[::-1], ys[:, ::-1]
    return SteadyProfile(xs=grid.copy(), rho=ys[0].copy(), E=ys[1].copy(), J=J, regime=reg,
                         law=law, b=b, dense=sol.sol)


def perturbation_growth(base: SteadyProfile, perturbed: SteadyProfile) -> tuple[float, float]:
    """Sup-norm deviations of rho and rho' between two profiles on a shared grid."""
    if (base.xs.shape != perturbed.xs.shape or not np.array_equal(base.xs, perturbed.xs)):
        raise UsageError("profiles must share the same grid")
    if base.regime != perturbed.regime or base.J != perturbed.J or base.law != perturbed.law:
        raise UsageError("profiles must share regime, flux and pressure law")
    sup_dev = float(np.max(np.abs(perturbed.rho - base.rho)))
    c1_dev = float(np.max(np.abs(perturbed.drho - base.drho)))
    return sup_dev, c1_dev
