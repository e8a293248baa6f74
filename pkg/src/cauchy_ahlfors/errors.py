"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class BandLimitError(ValueError):
    """A Fourier mode or generator band exceeds the resolvable band of the grid."""


class DegenerateMetricError(ValueError):
    """Metric (or quadrature density) fails to be positive definite somewhere."""

    def __init__(self, message, point=None, coordinates=None):
        super().__init__(message)
        self.point = point
        self.coordinates = coordinates


class InconsistentSystemError(ValueError):
    """Right-hand side has a component along the kernel of the operator."""


class SolverFailureError(RuntimeError):
    """Iterative solver did not reach its tolerance.

    ``residual_history`` holds the relative residual after every iteration.
    """

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)
