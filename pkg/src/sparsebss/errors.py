"""Exception types shared across the toolkit."""


class SingularMatrixError(ValueError):
    """Matrix is singular (or numerically indistinguishable from singular)."""


class DivergedError(RuntimeError):
    """An iterative solver produced non-finite values.

    Attributes
    ----------
    iteration : int or None
        Iteration index (0-based) at which divergence was detected.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class UnsupportedConfigError(ValueError):
    """Requested configuration is outside what the algorithm supports."""
