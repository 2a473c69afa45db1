"""Exception hierarchy shared across the package."""


class RangeVolError(Exception):
    """Base class for every error raised by rangevol."""


class ParameterError(RangeVolError, ValueError):
    """A model or configuration parameter is outside its valid range."""


class DomainError(RangeVolError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class InfeasibleMoments(RangeVolError, ValueError):
    """The sample moments admit no solution of the moment equation."""


class NoConvergence(RangeVolError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class InsufficientData(RangeVolError, ValueError):
    """Too few observations for the requested statistic."""


class ValidationError(RangeVolError, ValueError):
    """Input data violate a structural invariant (bad bar, bad quote, bad row)."""


class BudgetError(RangeVolError, RuntimeError):
    """A simulation request exceeds the configured work budget."""
