"""Exception hierarchy.

Every error raised by this package derives from :class:`IncompatError`,
so callers can catch one type at the boundary. The CLI maps these onto
exit codes (input errors -> 1, solver errors -> 2, internal
inconsistencies -> 3).
"""


class IncompatError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(IncompatError):
    """Dimension outside the supported range (e.g. d < 2)."""


class InvalidShapeError(IncompatError):
    """Matrix shape inconsistent with the declared dimensions."""


class InvalidParameterError(IncompatError):
    """Scalar parameter outside its allowed range."""


class NotAChannelError(IncompatError):
    """Operator data fails the channel (CPTP) invariants."""


class TooLargeError(IncompatError):
    """Enumeration would exceed the configured cap."""


class SolverError(IncompatError):
    """Conic solver failed; carries the raw termination status."""

    def __init__(self, message: str, status: str = ""):
        super().__init__(message)
        self.status = status


class BracketError(IncompatError):
    """Bisection bracket does not satisfy feasible(lo) / infeasible(hi)."""


class UncheckedPremiseError(IncompatError):
    """A check requires a warrant (e.g. EB membership) that was not supplied."""


class InvalidCertificateError(IncompatError):
    """A supplied certificate does not match the object it claims to certify."""


class BoundUnavailableError(IncompatError):
    """No bound formula applies at this dimension."""


class InternalInconsistencyError(IncompatError):
    """Certified bounds crossed; this signals a bug, never a valid output."""
