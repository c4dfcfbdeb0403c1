"""Exception types shared across the package.

Numerical failures (quadrature that will not converge, singular systems,
coincident evaluation points) are kept distinct from configuration problems so
the command line tool can map them onto different exit codes.
"""


class RoughLSMError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RoughLSMError):
    """A run configuration is malformed, inconsistent, or incomplete."""


class NumericalError(RoughLSMError):
    """Base class for runtime numerical failures."""


class CoincidentPointsError(NumericalError):
    """Source and evaluation point coincide where a kernel is singular."""


class QuadratureConvergenceError(NumericalError):
    """A spectral integral did not reach the requested accuracy."""


class MeshBudgetError(NumericalError):
    """A requested mesh exceeds the dense-solver cell budget."""


class FileFormatError(RoughLSMError):
    """A data file does not match the documented on-disk layout."""
