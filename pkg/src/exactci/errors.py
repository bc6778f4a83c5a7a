"""Exception and warning types shared across the package."""


class ExactCIError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ExactCIError, ValueError):
    """An argument violates a documented precondition."""


class GridResolutionWarning(UserWarning):
    """A search grid was too coarse to certify a nonempty solution set."""
