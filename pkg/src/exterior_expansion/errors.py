"""Exception taxonomy shared by the library and the CLI."""


class ExpansionError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


class DomainError(ExpansionError, ValueError):
    code = "domain_error"


class RangeError(DomainError):
    """A value lies outside an interval; ``bound`` names the violated endpoint."""

    code = "range_error"

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ContractError(ExpansionError, ValueError):
    code = "contract_violation"


class NoSolutionError(ExpansionError):
    code = "no_solution"


class CriticalPointError(ExpansionError):
    code = "critical_point"


class SingularSeriesError(ExpansionError, ZeroDivisionError):
    code = "singular_series"


class SingularityError(ExpansionError):
    """An ODE trajectory reached a singular set; ``radius`` is where it stopped."""

    code = "singularity"

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class ConvexityError(ExpansionError):
    code = "convexity"

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class NotDecayingError(ExpansionError):
    code = "not_decaying"


class NumericalError(ExpansionError, ArithmeticError):
    code = "numerical_failure"
