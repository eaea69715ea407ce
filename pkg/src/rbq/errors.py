"""Exception hierarchy shared by the analytic, oracle and simulation layers."""


class RBQError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RBQError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateInputError(DomainError):
    """The conditioning event of the residual operator is (numerically) empty."""


class InvalidDensityError(DomainError):
    """The density at zero required for inversion is zero or infinite."""


class InstabilityError(RBQError):
    """The queue does not satisfy its stability condition."""


class NormalizationError(InstabilityError):
    """A probability vector cannot be normalised (tail ratio >= 1)."""


class NumericError(RBQError, ArithmeticError):
    """An iterative or quadrature routine failed to converge."""


class RootBracketError(NumericError):
    """No sign change on the bracketing interval."""


class TailError(NumericError):
    """A truncated state space leaves too much probability mass in the tail."""


class PartitionError(DomainError):
    """A D/M/U partition is malformed (empty or overlapping sets)."""


class EstimationError(DomainError):
    """An empirical estimator received no samples."""


class ConfigError(RBQError):
    """A configuration file is missing, unreadable or fails validation."""


class RBPViolation(AssertionError):
    """A segment tracker observed |N^U - N^D| > 1 or non-alternating ends."""
