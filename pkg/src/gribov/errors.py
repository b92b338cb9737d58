"""Exception hierarchy shared by every module.

Numerical failures carry whatever partial data was available when the
certificate failed so callers (and the CLI) can report it.
"""


class GribovError(Exception):
    """Base class for all package errors."""


class InvalidRangeError(GribovError, ValueError):
    pass


class InvalidParameterError(GribovError, ValueError):
    pass


class DimensionError(GribovError, ValueError):
    pass


class ParameterRegimeError(GribovError, ValueError):
    """Requested quantity is undefined for these couplings (e.g. delta needs lambda' != 0)."""


class DomainError(GribovError, ValueError):
    pass


class NumericalError(GribovError, ArithmeticError):
    """A convergence certificate failed.  ``certificate`` names it."""

    certificate = "numerical"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SolverError(NumericalError):
    certificate = "eigensolver"


class ConvergenceError(NumericalError):
    certificate = "truncation-drift"


class ExceptionalPointError(NumericalError):
    certificate = "bilinear-norm"


class ResolutionError(NumericalError):
    certificate = "resolution"


class QuadratureError(NumericalError):
    certificate = "node-doubling"


class NearPoleError(NumericalError):
    certificate = "near-pole"


class PairingError(NumericalError):
    certificate = "eigenvalue-pairing"


class GapError(GribovError, ValueError):
    pass


class UnderflowError(NumericalError):
    """Propagator norm underflowed; the requested times are too large."""

    certificate = "propagator-underflow"
