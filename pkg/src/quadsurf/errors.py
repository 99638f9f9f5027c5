"""Exception hierarchy shared by all modules."""


class QuadsurfError(Exception):
    """Base class for every error raised by the package."""


class InvalidBodyError(QuadsurfError, ValueError):
    pass


class InsideBodyError(QuadsurfError, ValueError):
    pass


class DegenerateHullError(QuadsurfError, ValueError):
    pass


class MeasureValidationError(QuadsurfError, ValueError):
    pass


class OutOfGridError(QuadsurfError, ValueError):
    pass


class OutsideDomainError(QuadsurfError, ValueError):
    pass


class NearBoundaryError(QuadsurfError, ValueError):
    """Derivative stencil would reach across the domain boundary."""


class InvalidSolutionError(QuadsurfError, ValueError):
    pass


class UnsupportedOnGridError(QuadsurfError, ValueError):
    pass


class PreconditionError(QuadsurfError, ValueError):
    pass


class SolverFailure(QuadsurfError, RuntimeError):
    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class CollapseError(QuadsurfError, RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DivergenceError(QuadsurfError, RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class UnboundedRayError(QuadsurfError, RuntimeError):
    pass


class LevelAboveRayError(QuadsurfError, ValueError):
    pass
