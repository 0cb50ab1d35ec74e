"""Exception types shared across the package.

Every failure mode that callers are expected to distinguish gets its own
class; generic ValueError/RuntimeError is reserved for programming errors.
"""


class ProplaceError(Exception):
    """Base class for all package-specific errors."""


class InputShapeError(ProplaceError):
    """A vector or matrix does not match the dimension the operation expects."""


class DegenerateDataError(ProplaceError):
    """The dataset cannot support the requested operation (e.g. single class)."""


class InvalidShiftError(ProplaceError):
    """The magnitude of the parameter shift set is not a positive real."""


class CertificationTimeoutError(ProplaceError):
    """The certification solve hit its time limit.

    Inconclusive: the point may or may not be robust.  Distinct from a
    completed solve that returns robust=False.
    """


class InternalConsistencyError(ProplaceError):
    """A cross-check between two internal computations disagreed."""


class MilpEncodingError(ProplaceError):
    """A returned MILP assignment violates the semantics it was meant to encode
    (typically an undersized big-M constant)."""


class NumericError(ProplaceError):
    """The LP solver could not recover from numerical trouble."""


class NoCandidatesError(ProplaceError):
    """No dataset point matches the requested class filter."""


class InsufficientRobustNeighboursError(ProplaceError):
    """Fewer robust neighbours exist than were requested."""

    def __init__(self, found, requested):
        self.found = found
        self.requested = requested
        super().__init__(
            f"found only {found} robust neighbour(s), {requested} requested"
        )


class NoFeasibleCeError(ProplaceError):
    """The search region contains no point satisfying the validity constraints."""


class NonConvergenceError(ProplaceError):
    """The refinement loop exhausted its iteration budget.

    Carries the partial trace so callers can inspect the failed run.
    """

    def __init__(self, message, trace=None):
        self.trace = trace if trace is not None else []
        super().__init__(message)


class InsufficientReferenceError(ProplaceError):
    """The reference set is too small for the requested neighbourhood size."""


class CsvParseError(ProplaceError):
    """A CSV cell could not be parsed; carries row and column of the offender."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        super().__init__(message)


class LpParseError(ProplaceError):
    """An LP-format file could not be parsed."""
