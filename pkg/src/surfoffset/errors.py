"""Exception hierarchy shared by every stage of the offset pipeline."""


class SurfOffsetError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SurfOffsetError, ValueError):
    """Invalid user configuration (bad parameters, cutoff too small, ...)."""


class DomainError(SurfOffsetError, ValueError):
    """A parameter point lies outside the surface domain on a non-periodic axis."""


class DegenerateMetricError(SurfOffsetError, ArithmeticError):
    """The first fundamental form is not positive definite at an evaluation point."""


class ResolutionError(SurfOffsetError, ValueError):
    """A discretization asks for more resolution than the input provides."""


class RefinementError(SurfOffsetError):
    """A triangulation violates the strict triangle inequality; use a denser grid."""


class ConnectivityError(SurfOffsetError):
    """Two mesh vertices are not connected by any edge path."""


class UnsupportedInputError(SurfOffsetError, ValueError):
    """The input is valid in principle but not handled by this version."""


class InternalError(SurfOffsetError, RuntimeError):
    """An internal consistency check failed."""
