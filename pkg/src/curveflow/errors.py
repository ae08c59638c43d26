"""Exception hierarchy shared by all curveflow modules."""


class CurveFlowError(Exception):
    """Base class for errors raised by curveflow."""


class InvalidArgumentError(CurveFlowError, ValueError):
    """An argument is outside its documented range."""


class DegenerateCurveError(CurveFlowError):
    """A polygon has (numerically) zero-length elements."""

    def __init__(self, message, elements=None):
        super().__init__(message)
        self.elements = elements


class SingularSystemError(CurveFlowError):
    """The linear system of a time step could not be solved accurately."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class StabilityViolation(CurveFlowError):
    """The discrete energy bound of a curve-diffusion step was violated."""

    def __init__(self, message, step=None, excess=None):
        super().__init__(message)
        self.step = step
        self.excess = excess
