"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation supports."""


class ConfigurationError(ValueError):
    """A kernel, map or run configuration violates its invariants."""


class NumericalFailure(ArithmeticError):
    """A numerical routine did not reach its accuracy target.

    ``work`` carries the number of series terms, quadrature nodes or
    iterations spent before giving up, and ``error_estimate`` the last
    available error estimate (``nan`` when none exists).
    """

    def __init__(self, message, work=0, error_estimate=float("nan")):
        super().__init__(message)
        self.work = work
        self.error_estimate = error_estimate
