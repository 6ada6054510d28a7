"""Exception hierarchy shared across the package."""


class SteinShrinkError(Exception):
    """Base class for all package errors."""


class SymmetryError(SteinShrinkError, ValueError):
    """Input matrix is not symmetric within tolerance."""

    def __init__(self, message, i, j):
        super().__init__(message)
        self.i = i
        self.j = j


class DimensionError(SteinShrinkError, ValueError):
    """Inconsistent matrix shapes or model dimensions."""


class ParameterError(SteinShrinkError, ValueError):
    """A scalar parameter is outside its domain."""


class RankDeficiencyError(SteinShrinkError, ValueError):
    """Fewer eigenvalues above the numerical threshold than required."""

    def __init__(self, message, observed_rank, required_rank):
        super().__init__(message)
        self.observed_rank = observed_rank
        self.required_rank = required_rank


class DegenerateConfigurationError(RankDeficiencyError):
    """The product of the pseudoinverse covariance and the estimate lost rank.

    Happens (with probability zero under the sampling model) when the column
    space of the estimate is nearly orthogonal to the range of the covariance.
    """


class ReplicationError(SteinShrinkError):
    """A Monte Carlo replication failed; carries the replication index."""

    def __init__(self, message, replication):
        super().__init__(message)
        self.replication = replication

    def __reduce__(self):
        return (type(self), (self.args[0], self.replication))
