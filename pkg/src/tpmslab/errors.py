"""Exception hierarchy shared by every tpmslab module."""


class TPMSError(Exception):
    """Base class for all package errors."""


class DomainError(TPMSError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonConvergence(TPMSError):
    """An iterative method exhausted its budget.

    The best available value and its error estimate are kept so callers can
    decide whether the partial answer is usable.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class InvalidBracket(TPMSError, ValueError):
    """A minimization bracket does not enclose a minimum."""


class FactorizationBreakdown(TPMSError):
    """A symmetric factorization hit a (numerically) zero pivot."""


class RootFindingFailure(TPMSError):
    """Polynomial roots could not be resolved to the requested accuracy."""


class PathTooCloseToBranchPoint(TPMSError):
    """A chart path comes closer to a branch point than its clearance."""


class WAtZero(TPMSError):
    """Evaluation requested exactly at a branch point, where w = 0."""


class UnsupportedFamily(TPMSError, ValueError):
    """The operation has no data for this family."""


class SingularBasis(TPMSError, ValueError):
    """A lattice basis is (numerically) degenerate."""


class CutConstructionFailure(TPMSError):
    """No disjoint system of branch cuts could be laid on the mesh."""


class CalibrationFailure(TPMSError):
    """Killing-Jacobi fields are not numerically in the kernel."""


class RankDeficiency(TPMSError):
    """Period vectors span fewer than three dimensions."""


class NonDiscrete(TPMSError):
    """Period vectors do not generate a discrete lattice."""


class NoCoherentAngle(TPMSError):
    """No associate angle in the bracket closes the periods."""
