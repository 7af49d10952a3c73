"""Exception hierarchy shared by every module."""

from __future__ import annotations


class DomainError(ValueError):
    """A point lies outside the set where an expression or structure is defined."""


class HypothesisError(ValueError):
    """A nonvanishing hypothesis of the family fails at some point."""


class SingularChartError(HypothesisError):
    """The distinguished difference psi_i - psi_j vanishes, so Casimirs and the chart are undefined."""


class OutOfChartError(ValueError):
    """A point in Darboux coordinates has no preimage in the domain."""


class NoRootError(ValueError):
    """A target value lies outside the image of the search bracket."""


class NotMonotoneError(ValueError):
    """A function is not strictly monotone on the requested bracket."""


class NumericError(ArithmeticError):
    """A factor evaluated to a non-finite value."""


class IntegrationError(RuntimeError):
    """Base class for integrator failures; carries the partial trajectory."""

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record


class DomainExit(IntegrationError):
    """The trajectory left the domain; ``record`` ends at the last valid state."""


class StepSizeUnderflow(IntegrationError):
    """The adaptive step shrank below the representable resolution of t."""
