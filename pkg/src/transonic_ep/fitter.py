"""Steady transonic shock construction by monotone bisection on the shock position.

For a trial shock position ``a`` the supersonic profile launched from the
left boundary is jumped to its conjugate subsonic state at ``a`` and the
subsonic branch is integrated to the right boundary; ``g(a) = rho(L)`` is
the resulting exit density.  Under a positive field at the shock ``g`` is
strictly decreasing, so the prescribed exit density pins the shock.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .eos import FlowPoint, PressureLaw, Regime, sonic_density
from .errors import (HypothesisViolation, InfeasibleShockPosition, NoSolution, SolverFailure,
                     SonicSingularity, UsageError)
from .jump import conjugate_state, is_entropy_admissible
from .steady import BackgroundCharge, IntegrateOptions, SteadyProfile, integrate

logger = logging.getLogger(__name__)


@dataclass
class FitOptions:
    exit_tol: float = 1e-10
    pos_tol: float = 1e-12
    n_scan: int = 64
    max_bisect: int = 200
    integrate: IntegrateOptions = field(default_factory=lambda: IntegrateOptions(tol=1e-12))


@dataclass
class Boundary:
    rho_l: float
    E_l: float
    rho_r: float | None = None


@dataclass
class TransonicSolution:
    left: SteadyProfile
    right: SteadyProfile
    x0: float
    J: float
    exit_density: float
    field_at_shock: float
    L: float
    boundary: Boundary

    @property
    def law(self) -> PressureLaw:
        return self.left.law

    @property
    def b(self) -> BackgroundCharge:
        return self.left.b

    def jump_states(self) -> tuple[FlowPoint, FlowPoint]:
        up = FlowPoint(float(self.left.rho[-1]), float(self.left.E[-1]), self.J)
        down = FlowPoint(float(self.right.rho[0]), float(self.right.E[0]), self.J)
        return up, down

    def residuals(self) -> dict:
        up, down = self.jump_states()
        law = self.law
        f_up = law.p(up.rho) + self.J ** 2 / up.rho
        f_down = law.p(down.rho) + self.J ** 2 / down.rho
        return {
            "flux_identity": float(abs(f_down - f_up) / abs(f_up)),
            "conjugate": float(abs(down.rho - conjugate_state(law, self.J, up.rho))),
            "field_jump": float(abs(down.E - up.E)),
            "entropy_admissible": bool(is_entropy_admissible(law, up, down, 0.0)),
            "poisson_left": self.left.poisson_residual(),
            "poisson_right": self.right.poisson_residual(),
        }

    def metadata(self) -> dict:
        return {"x0": self.x0, "J": self.J, "exit_density": self.exit_density,
                "field_at_shock": self.field_at_shock, "L": self.L,
                "rho_l": self.boundary.rho_l, "E_l": self.boundary.E_l,
                "rho_r": self.boundary.rho_r, "residuals": self.residuals()}


@dataclass
class ExitEvaluation:
    a: float
    rho_exit: float
    E_sup: float
    rho_sup: float
    rho_sub: float
    flagged: bool  # E_sup(a) <= 0: monotonicity not guaranteed


class ExitDensityMap:
    """The map g(a) = rho(L) for a fixed supersonic launch (rho_l, E_l) at x = 0."""

    def __init__(self, law: PressureLaw, J: float, b: BackgroundCharge, L: float,
                 rho_l: float, E_l: float, opts: FitOptions | None = None,
                 supersonic_base: SteadyProfile | None = None):
        self.law, self.J, self.b, self.L = law, float(J), b, float(L)
        self.rho_l, self.E_l = float(rho_l), float(E_l)
        self.opts = opts or FitOptions()
        self.rho_s = sonic_density(law, J)
        if not 0.0 < rho_l < self.rho_s:
            raise UsageError(f"left state rho_l={rho_l} is not supersonic (rho_s={self.rho_s})")
        self.base = supersonic_base if supersonic_base is not None else supersonic_launch(
            law, J, b, L, rho_l, E_l, self.opts.integrate)
        if self.base.regime is not Regime.SUPERSONIC or self.base.xs[0] != 0.0:
            raise UsageError("supersonic base must be launched at x = 0")
        self.a_max = float(self.base.xs[-1])

    def jump_at(self, a: float) -> tuple[float, float, float]:
        """(rho_sup, E_sup, rho_sub) at trial shock position ``a``."""
        if not 0.0 < a <= self.a_max:
            raise UsageError(f"shock position {a} outside the supersonic domain (0, {self.a_max}]")
        rho_sup, E_sup = self.base.at(a)
        rho_sup, E_sup = float(rho_sup), float(E_sup)
        return rho_sup, E_sup, conjugate_state(self.law, self.J, rho_sup)

    def subsonic_branch(self, a: float, xs: np.ndarray | None = None) -> SteadyProfile:
        if not a < self.L:
            raise UsageError("shock position must lie strictly inside (0, L)")
        rho_sup, E_sup, rho_sub = self.jump_at(a)
        opts = replace(self.opts.integrate, xs=xs)
        try:
            return integrate(self.law, self.J, self.b, a, self.L, FlowPoint(rho_sub, E_sup, self.J), opts)
        except SonicSingularity as exc:
            raise InfeasibleShockPosition(
                f"subsonic branch from a={a} reaches the sonic band at x={exc.x}", a, exc.x) from exc

    def evaluate(self, a: float) -> ExitEvaluation:
        rho_sup, E_sup, rho_sub = self.jump_at(a)
        prof = self.subsonic_branch(a, xs=np.array([a, self.L]))
        return ExitEvaluation(a, float(prof.rho[-1]), E_sup, rho_sup, rho_sub, E_sup <= 0.0)

    def __call__(self, a: float) -> float:
        return self.evaluate(a).rho_exit

    def scan(self, positions=None) -> list[ExitEvaluation]:
        if positions is None:
            n = self.opts.n_scan
            positions = [self.L * j / (n + 1) for j in range(1, n + 1)]
        out = []
        for a in positions:
            if a > self.a_max or a >= self.L:
                continue
            try:
                out.append(self.evaluate(float(a)))
            except InfeasibleShockPosition:
                logger.debug("shock position %g infeasible", a)
        return out


def supersonic_launch(law: PressureLaw, J: float, b: BackgroundCharge, L: float,
                      rho_l: float, E_l: float, opts: IntegrateOptions | None = None) -> SteadyProfile:
    """Supersonic profile from (rho_l, E_l) at x=0, truncated before any sonic breach."""
    opts = opts or IntegrateOptions(tol=1e-12)
    start = FlowPoint(rho_l, E_l, J)
    try:
        return integrate(law, J, b, 0.0, L, start, opts)
    except SonicSingularity as exc:
        end = exc.x * (1.0 - 1e-6)
        if end <= 0.0:
            raise
        logger.info("supersonic launch reaches the sonic band at x=%g; truncating", exc.x)
        return integrate(law, J, b, 0.0, end, start, opts)


def exit_density_map(law: PressureLaw, J: float, b: BackgroundCharge, L: float,
                     supersonic_base: SteadyProfile, a: float, opts: FitOptions | None = None) -> float:
    rho_l, E_l = float(supersonic_base.rho[0]), float(supersonic_base.E[0])
    g = ExitDensityMap(law, J, b, L, rho_l, E_l, opts, supersonic_base=supersonic_base)
    return g(a)


def check_monotone(evals: list[ExitEvaluation]) -> None:
    """Raise if g fails to decrease strictly across flag-free scanned positions."""
    clean = [e for e in evals if not e.flagged]
    for e1, e2 in zip(clean, clean[1:]):
        if not e2.rho_exit < e1.rho_exit:
            raise HypothesisViolation(
                f"exit density not decreasing between a={e1.a:.6g} and a={e2.a:.6g} "
                f"({e1.rho_exit:.12g} -> {e2.rho_exit:.12g})")


def fit_shock(law: PressureLaw, J: float, b: BackgroundCharge, boundary: Boundary, L: float,
              opts: FitOptions | None = None, bracket: tuple[float, float] | None = None,
              exit_map: ExitDensityMap | None = None) -> TransonicSolution:
    """Locate the shock so that the exit density equals ``boundary.rho_r``."""
    opts = opts or FitOptions()
    if boundary.rho_r is None:
        raise UsageError("boundary.rho_r is required to fit a shock")
    rho_s = sonic_density(law, J)
    if not boundary.rho_r > rho_s:
        raise UsageError(f"exit density {boundary.rho_r} is not subsonic (rho_s={rho_s})")
    if b.max() >= rho_s:
        raise HypothesisViolation(f"background charge max {b.max():.6g} >= sonic density {rho_s:.6g}")
    g = exit_map or ExitDensityMap(law, J, b, L, boundary.rho_l, boundary.E_l, opts)
    target = float(boundary.rho_r)

    if bracket is None:
        evals = g.scan()
        if not evals:
            raise NoSolution("no feasible shock position in (0, L)", (math.nan, math.nan))
        check_monotone(evals)
        lo = hi = None
        for e1, e2 in zip(evals, evals[1:]):
            if (e1.rho_exit - target) * (e2.rho_exit - target) <= 0.0:
                lo, hi = e1, e2
                break
        if lo is None:
            rng = (min(e.rho_exit for e in evals), max(e.rho_exit for e in evals))
            raise NoSolution(f"exit density {target} outside attainable range [{rng[0]:.12g}, {rng[1]:.12g}]",
                             rng)
        a_lo, a_hi, f_lo = lo.a, hi.a, lo.rho_exit - target
    else:
        a_lo, a_hi = map(float, bracket)
        f_lo = g(a_lo) - target
        if f_lo * (g(a_hi) - target) > 0.0:
            raise NoSolution("supplied bracket does not contain a sign change",
                             tuple(sorted((f_lo + target, g(a_hi)))))

    # bisection; stop when both the residual and bracket width are below tolerance
    for _ in range(opts.max_bisect):
        mid = 0.5 * (a_lo + a_hi)
        f_mid = g(mid) - target
        if f_mid == 0.0:
            a_lo = a_hi = mid
            break
        if f_lo * f_mid < 0.0:
            a_hi = mid
        else:
            a_lo, f_lo = mid, f_mid
        if a_hi - a_lo <= opts.pos_tol and abs(f_mid) <= opts.exit_tol:
            break
    else:
        raise SolverFailure("shock bisection did not converge", bracket=(a_lo, a_hi))
    x0 = 0.5 * (a_lo + a_hi)
    sol = assemble(g, x0, boundary)
    if abs(sol.exit_density - target) > opts.exit_tol:
        raise SolverFailure(f"exit residual {abs(sol.exit_density - target):.3e} exceeds tolerance",
                            bracket=(a_lo, a_hi))
    return sol


def assemble(g: ExitDensityMap, x0: float, boundary: Boundary) -> TransonicSolution:
    """Build the full transonic solution with the shock placed at ``x0``."""
    io = g.opts.integrate
    n_left = max(io.min_points, int(math.ceil(x0 / io.max_dx)) + 1)
    xs_left = np.linspace(0.0, x0, n_left)
    rho_left, E_left = (np.array(v, dtype=float) for v in g.base.at(xs_left))
    # the shock-side samples must be the exact states handed to the jump
    rho_left[-1], E_left[-1], _ = g.jump_at(x0)
    left = SteadyProfile(xs_left, rho_left, E_left, g.J, Regime.SUPERSONIC,
                         g.law, g.b, dense=g.base.dense)
    n_right = max(io.min_points, int(math.ceil((g.L - x0) / io.max_dx)) + 1)
    right = g.subsonic_branch(x0, xs=np.linspace(x0, g.L, n_right))
    exit_rho = float(right.rho[-1])
    bnd = Boundary(boundary.rho_l, boundary.E_l, boundary.rho_r if boundary.rho_r is not None else exit_rho)
    return TransonicSolution(left, right, float(x0), g.J, exit_rho, float(right.E[0]), g.L, bnd)


def solution_with_shock_at(law: PressureLaw, J: float, b: BackgroundCharge, rho_l: float, E_l: float,
                           L: float, x0: float, opts: FitOptions | None = None) -> TransonicSolution:
    """Transonic solution with a prescribed shock position; rho_r := g(x0)."""
    g = ExitDensityMap(law, J, b, L, rho_l, E_l, opts)
    return assemble(g, x0, Boundary(rho_l, E_l, None))


# ---------------------------------------------------------------------------
# structural stability under background perturbations


SHAPES = ("offset", "bump", "sinusoid")


@dataclass
class StabilityRow:
    shape: str
    eps: float
    x0: float
    shift: float
    ratio: float
    rho_sup_dev: float
    rho_sub_dev: float


@dataclass
class StabilityReport:
    x0: float
    rows: list[StabilityRow]
    factor_limit: float = 3.0

    def ratios(self, shape: str) -> list[float]:
        return [r.ratio for r in self.rows if r.shape == shape and r.eps != 0.0]

    def spread(self, shape: str) -> float:
        rs = self.ratios(shape)
        if not rs or min(rs) == 0.0:
            return math.inf if rs else 1.0
        return max(rs) / min(rs)

    def direction(self, shape: str) -> int | None:
        """Common sign of the shift for this shape, or None when inconsistent."""
        signs = {int(np.sign(r.shift)) for r in self.rows if r.shape == shape and r.eps != 0.0}
        return signs.pop() if len(signs) == 1 else None

    @property
    def stable(self) -> bool:
        shapes = {r.shape for r in self.rows}
        return all(self.spread(s) <= self.factor_limit for s in shapes)


def structural_stability_experiment(base_b: BackgroundCharge, perturbations, law: PressureLaw, J: float,
                                    boundary: Boundary, L: float, shapes=SHAPES,
                                    opts: FitOptions | None = None,
                                    shape_params: dict | None = None) -> StabilityReport:
    """Re-fit the shock for b + eps*shape and report |x0~ - x0| / eps per case."""
    opts = opts or FitOptions()
    base = fit_shock(law, J, base_b, boundary, L, opts)
    e0 = base.field_at_shock
    if not e0 > 0.0:
        raise HypothesisViolation(f"base field at shock E(x0)={e0:.6g} is not positive")
    up0, down0 = base.jump_states()
    rows = []
    shape_params = shape_params or {}
    for shape in shapes:
        for eps in perturbations:
            eps = float(eps)
            if eps == 0.0:
                sol = fit_shock(law, J, base_b, boundary, L, opts)
            else:
                b = base_b.perturbed(shape, eps, **shape_params.get(shape, {}))
                sol = fit_shock(law, J, b, boundary, L, opts)
            up, down = sol.jump_states()
            shift = sol.x0 - base.x0
            rows.append(StabilityRow(shape, eps, sol.x0, shift,
                                     abs(shift) / eps if eps else math.nan,
                                     abs(up.rho - up0.rho), abs(down.rho - down0.rho)))
    return StabilityReport(base.x0, rows)
