"""
Exception hierarchy shared by every matchlab package
"""

from typing import Any


class MatchlabError(Exception):
    """Base class for all matchlab failures"""


class InvalidArgumentError(MatchlabError, ValueError):
    """A precondition on an argument was violated"""


class DomainError(InvalidArgumentError):
    """A function was evaluated outside the set where it is defined"""


class AccuracyError(MatchlabError, ArithmeticError):
    """A truncation radius or quadrature grid would exceed its configured cap"""

    def __init__(self, message: str, required: int | None = None, limit: int | None = None):
        super().__init__(message)
        self.required = required
        self.limit = limit


class ConvergenceError(MatchlabError, RuntimeError):
    """The dual solver stopped before meeting its tolerance"""

    def __init__(
        self,
        message: str,
        residuals: list[float] | None = None,
        seed: int | None = None,
        replica: int | None = None,
    ):
        super().__init__(message)
        self.residuals = list(residuals or [])
        self.seed = seed
        self.replica = replica

    def with_replica(self, seed: int, replica: int) -> "ConvergenceError":
        """Copy of this error tagged with the failing (seed, replica)"""
        return ConvergenceError(
            f"{self} (seed={seed}, replica={replica})",
            residuals=self.residuals,
            seed=seed,
            replica=replica,
        )


class ConfigError(MatchlabError, ValueError):
    """A run configuration could not be parsed or validated"""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for the run manifest"""
        return {"error": str(self), "key": self.key}
