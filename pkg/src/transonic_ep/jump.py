"""Shock jump relations: conjugate state, shock speed, Lax admissibility."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .eos import FlowPoint, PressureLaw, momentum_flux, sonic_density
from .errors import DegenerateJump, DomainError, SonicSingularity
from .roots import newton_bisect
from .steady import sonic_gap


@dataclass(frozen=True)
class JumpPair:
    upstream: FlowPoint
    downstream: FlowPoint
    shock_speed: float

    def residuals(self, law: PressureLaw) -> tuple[float, float, float]:
        """(mass, momentum, field) jump-condition residuals."""
        l, r, s = self.upstream, self.downstream, self.shock_speed
        mass = (r.J - l.J) - (r.rho - l.rho) * s
        mom = (momentum_flux(law, r.rho, r.J) - momentum_flux(law, l.rho, l.J)) - (r.J - l.J) * s
        return mass, mom, r.E - l.E


def conjugate_state(law: PressureLaw, J: float, rho_sup: float) -> float:
    """Subsonic density sharing the momentum flux p + J^2/rho with ``rho_sup``."""
    rho_s = sonic_density(law, J)
    if rho_sup > rho_s * (1.0 + 1e-14):
        raise DomainError(f"rho_sup={rho_sup!r} exceeds the sonic density {rho_s!r}")
    target = float(momentum_flux(law, rho_sup, J))

    def f(s):
        return float(momentum_flux(law, s, J)) - target, float(sonic_gap(law, J, s))

    f_sonic = f(rho_s)[0]
    if f_sonic >= -4.0 * math.ulp(target):
        return rho_s
    hi = 2.0 * rho_s
    while f(hi)[0] <= 0.0:
        hi *= 2.0
    return newton_bisect(f, rho_s, hi, xtol=1e-16, ftol=2.0 * math.ulp(target))


def conjugate_derivative(law: PressureLaw, J: float, rho_sup: float, tol_sonic: float = 1e-8) -> float:
    """d(conjugate)/d(rho) = gap(rho) / gap(conjugate(rho))."""
    rho_s = sonic_density(law, J)
    band = tol_sonic * float(law.dp(rho_s))
    num = float(sonic_gap(law, J, rho_sup))
    if abs(num) < band:
        raise SonicSingularity("conjugate derivative is singular at the sonic state", math.nan)
    s = conjugate_state(law, J, rho_sup)
    return num / float(sonic_gap(law, J, s))


def shock_speed(law: PressureLaw, left: FlowPoint, right: FlowPoint) -> tuple[float, float]:
    """Speed [rho u]/[rho] and the momentum-condition mismatch at that speed."""
    drho = right.rho - left.rho
    if drho == 0.0:
        raise DegenerateJump("equal densities on both sides of the jump")
    dJ = right.J - left.J
    speed = dJ / drho
    mismatch = (float(momentum_flux(law, right.rho, right.J) - momentum_flux(law, left.rho, left.J))
                - dJ * speed)
    return speed, mismatch


def is_entropy_admissible(law: PressureLaw, left: FlowPoint, right: FlowPoint, speed: float) -> bool:
    cl = math.sqrt(float(law.dp(left.rho)))
    cr = math.sqrt(float(law.dp(right.rho)))
    return (left.u - cl > speed > right.u - cr) and (right.u + cr > speed)


def steady_jump(law: PressureLaw, J: float, upstream: FlowPoint) -> JumpPair:
    """Stationary transonic shock issued from a supersonic upstream state."""
    s = conjugate_state(law, J, upstream.rho)
    return JumpPair(upstream, FlowPoint(s, upstream.E, J), 0.0)
