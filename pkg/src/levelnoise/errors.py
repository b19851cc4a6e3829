"""Exception types raised across the package."""


class SizeError(ValueError):
    """Matrix dimension too large for the requested operation."""


class SolverError(RuntimeError):
    """An eigensolver failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class IncompleteWindowError(SolverError):
    """Lanczos did not find every eigenvalue the inertia count predicts."""

    def __init__(self, found, expected, iterations=None):
        super().__init__(
            f"window solve incomplete: found {found} of {expected} eigenvalues "
            f"after {iterations} Lanczos steps",
            iterations,
        )
        self.found = found
        self.expected = expected


class DomainError(ValueError):
    """A value lies outside the domain of a map (IDOS, counting function)."""


class InsufficientDataError(ValueError):
    """Too few samples for the requested statistic."""


class FitDomainError(ValueError):
    """Power-law fit requested on nonpositive or too few data points."""


class DataIntegrityError(ValueError):
    """Input data violates an ordering or validity requirement."""


class PlanMismatchError(ValueError):
    """Partial experiment reports cannot be merged."""


class NonMonotoneError(ValueError):
    """A fitted integrated density of states decreases somewhere."""
