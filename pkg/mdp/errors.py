"""
Exception hierarchy shared by the numeric packages.
"""
from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


class DimensionError(LabError, ValueError):
    """A table does not match the shape of the MDP it is used with."""


class NonConvergenceError(LabError, RuntimeError):
    """A fixed-point iteration hit its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: Optional[int] = None):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class InstanceTooLargeError(LabError, ValueError):
    """Brute-force enumeration was asked for too many policies."""


class PreconditionError(LabError, ValueError):
    """An operation's precondition (degeneracy, optimality) is not met."""


class ArgumentError(LabError, ValueError):
    """An argument is outside the operation's domain."""


class SupportViolationError(LabError, ValueError):
    """A KL term diverges because the base policy has zero mass where the policy does not."""
