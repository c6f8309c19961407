class BellmanError(ValueError):
    """Base class for input errors raised by this package."""


class DomainError(BellmanError):
    """A point lies outside R^2 x D_c (or outside [1, c] for the kernels)."""


class ParameterError(BellmanError):
    """Invalid construction parameter, e.g. c <= 1."""


class PreconditionError(BellmanError):
    """An operation was called outside its stated precondition."""
