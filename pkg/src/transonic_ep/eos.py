"""Pressure laws, sound speed, sonic state and flow-regime classification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, UsageError
from .roots import newton_bisect


class Regime(str, Enum):
    SUPERSONIC = "supersonic"
    SONIC = "sonic"
    SUBSONIC = "subsonic"


@dataclass(frozen=True)
class PressureLaw:
    """Barotropic pressure law ``p(rho) = k * rho**gamma``.

    ``kind="isothermal"`` is the linear law ``p = k*rho``. It violates
    ``p'(0) = 0`` and is therefore flagged with :attr:`relaxed_origin`.
    """

    kind: str
    k: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gamma_law", "isothermal"):
            raise UsageError(f"unknown pressure law kind {self.kind!r}")
        if not self.k > 0.0:
            raise UsageError("pressure constant k must be positive")
        if self.kind == "isothermal":
            object.__setattr__(self, "gamma", 1.0)
        elif not self.gamma >= 1.0:
            raise UsageError("gamma must be >= 1")

    @classmethod
    def gamma_law(cls, k: float, gamma: float) -> "PressureLaw":
        return cls("gamma_law", float(k), float(gamma))

    @classmethod
    def isothermal(cls, k: float) -> "PressureLaw":
        return cls("isothermal", float(k), 1.0)

    @property
    def relaxed_origin(self) -> bool:
        """True when p'(0) != 0, i.e. the law only satisfies the relaxed origin condition."""
        return self.gamma == 1.0

    def p(self, rho):
        return self.k * np.power(rho, self.gamma)

    def dp(self, rho):
        if self.gamma == 1.0:
            return self.k * np.ones_like(np.asarray(rho, dtype=float))[()]
        return self.k * self.gamma * np.power(rho, self.gamma - 1.0)

    def d2p(self, rho):
        if self.gamma == 1.0 or self.gamma == 2.0:
            c = 0.0 if self.gamma == 1.0 else 2.0 * self.k
            return c * np.ones_like(np.asarray(rho, dtype=float))[()]
        return self.k * self.gamma * (self.gamma - 1.0) * np.power(rho, self.gamma - 2.0)

    def remainder(self, rho, y):
        """p(rho+y) - p(rho) - p'(rho)*y without catastrophic cancellation."""
        g = self.gamma
        if g == 1.0:
            return 0.0 * np.asarray(y, dtype=float)
        if g == 2.0:
            return self.k * np.asarray(y, dtype=float) ** 2
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(y, dtype=float) / rho
        series = z * z * (g * (g - 1.0) / 2.0 + z * (g * (g - 1.0) * (g - 2.0) / 6.0
                                                  + z * g * (g - 1.0) * (g - 2.0) * (g - 3.0) / 24.0))
        with np.errstate(invalid="ignore"):
            direct = np.expm1(g * np.log1p(z)) - g * z
        return self.k * rho ** g * np.where(np.abs(z) < 1e-4, series, direct)

    def sound_speed(self, rho):
        return np.sqrt(self.dp(rho))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "k": self.k}
        if self.kind == "gamma_law":
            d["gamma"] = self.gamma
        return d


@dataclass(frozen=True)
class FlowPoint:
    """Density, electric field and mass flux at one location (u = J/rho)."""

    rho: float
    E: float
    J: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise DomainError(f"density must be positive, got {self.rho!r}")

    @property
    def u(self) -> float:
        return self.J / self.rho


def momentum_flux(law: PressureLaw, rho, J):
    """Steady momentum flux p(rho) + J^2/rho."""
    return law.p(rho) + J * J / rho


def sonic_density(law: PressureLaw, J: float, max_iter: int = 200) -> float:
    """Unique rho_s with p'(rho_s) = J^2 / rho_s^2.

    Solved on the increasing function rho**2 p'(rho) - J**2 with a safeguarded
    Newton-bisection iteration.
    """
    if not J > 0.0:
        raise DomainError("mass flux J must be positive")
    J2 = J * J
    if law.kind == "isothermal":
        return J / math.sqrt(law.k)

    def f(r):
        return r * r * law.dp(r) - J2, 2.0 * r * law.dp(r) + r * r * law.d2p(r)

    hi = 1.0
    while f(hi)[0] <= 0.0:
        hi *= 2.0
    lo = 1e-6 * hi
    while f(lo)[0] >= 0.0:
        lo *= 1e-3
    rho_s = newton_bisect(f, lo, hi, xtol=1e-16, ftol=1e-13 * J2, max_iter=max_iter)
    return float(rho_s)


def regime(law: PressureLaw, point: FlowPoint, tol_sonic: float | None = None) -> Regime:
    rho_s = sonic_density(law, point.J)
    tol = 1e-8 * rho_s if tol_sonic is None else tol_sonic
    if point.rho < rho_s - tol:
        return Regime.SUPERSONIC
    if point.rho > rho_s + tol:
        return Regime.SUBSONIC
    return Regime.SONIC
