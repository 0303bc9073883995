"""Exception hierarchy shared by all solver modules."""

from __future__ import annotations


class TransonicError(Exception):
    """Base class for every error raised by this package."""


class UsageError(TransonicError, ValueError):
    """Invalid arguments or mismatched inputs."""


class SolverFailure(TransonicError):
    """An iterative solver did not converge."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class SonicSingularity(TransonicError):
    """The trajectory entered the sonic band where the steady ODE is singular."""

    def __init__(self, message: str, x: float):
        super().__init__(message)
        self.x = x


class DomainError(TransonicError, ValueError):
    """An argument lies outside the admissible domain of a map."""


class DegenerateJump(TransonicError):
    """Left and right states have equal density; the shock speed is undefined."""


class InfeasibleShockPosition(TransonicError):
    """Placing the shock at the requested position does not produce a subsonic
    profile reaching the right boundary."""

    def __init__(self, message: str, position: float, breach_x: float | None = None):
        super().__init__(message)
        self.position = position
        self.breach_x = breach_x


class NoSolution(TransonicError):
    """The requested exit density lies outside the attainable range."""

    def __init__(self, message: str, attainable: tuple[float, float]):
        super().__init__(message)
        self.attainable = attainable


class HypothesisViolation(TransonicError):
    """A hypothesis required by the construction (e.g. positive field at the
    shock, monotone exit density) is violated."""


class StateInvalid(TransonicError):
    """A perturbed state reached vacuum or left the subsonic regime."""


class BoundarySolverError(SolverFailure):
    """Newton iteration for the shock boundary relation failed."""


class NormDegenerate(TransonicError):
    """The weighted energy norm is not positive definite for this base state."""


class ConfigError(UsageError):
    """Experiment configuration failed validation."""

    def __init__(self, message: str, keys: list[str] | None = None):
        super().__init__(message)
        self.keys = list(keys or [])


class NoModeFound(TransonicError):
    """No growing mode exists in the scanned range."""

    def __init__(self, message: str, scanned=None):
        super().__init__(message)
        self.scanned = scanned
