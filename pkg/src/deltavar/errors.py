"""Exception hierarchy shared by every module of the package."""


class DeltaVarError(Exception):
    """Base class for all errors raised by deltavar."""


class InvalidParameterError(DeltaVarError, ValueError):
    """A parameter violates a precondition of the requested operation."""


class NumericalError(DeltaVarError, ArithmeticError):
    """A numerical procedure failed (factorization, quadrature, overflow)."""


class SimulationDivergedError(NumericalError):
    """Time stepping produced non-finite values."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class DegenerateInputError(NumericalError):
    """The data make the requested estimator undefined (e.g. zero variation)."""


class ExperimentFailedError(DeltaVarError):
    """Too many Monte Carlo replications failed."""
