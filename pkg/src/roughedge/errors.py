"""Exception types raised by the toolkit."""


class RoughEdgeError(Exception):
    """Base class for all toolkit errors."""


class CoordinateFailure(RoughEdgeError):
    """Curve coordinates are undefined at the requested point."""


class GenericityFailure(RoughEdgeError):
    """No candidate evaluation point passed Diophantine/geometric screening."""

    def __init__(self, message, condition=None, record=None):
        super().__init__(message)
        self.condition = condition
        self.record = record


class AccuracyFailure(RoughEdgeError):
    """A numerical table or quadrature failed its accuracy certificate."""


class GridCoverageError(RoughEdgeError):
    """The sampling lattice does not cover the support it must cover."""


class RationalInput(RoughEdgeError):
    """A continued-fraction expansion terminated (input is rational)."""


class QuadratureFailure(RoughEdgeError):
    """Adaptive quadrature did not converge."""


class ConfigError(RoughEdgeError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.message = message
        self.key = key


class CacheIntegrityError(RoughEdgeError):
    """A cache file does not match its manifest checksum or layout."""
