"""Exception hierarchy shared by the library and the command-line front end."""


class CRBoundError(Exception):
    """Base class for all errors raised by crbound."""


class DomainError(CRBoundError, ValueError):
    """A parameter point lies outside the family's parameter domain."""


class FamilyError(CRBoundError, ValueError):
    """A family could not be constructed (normalization, negativity, bad map)."""


class ScoreError(CRBoundError, ArithmeticError):
    """A score could not be evaluated: zero density or the FD stencil left the domain."""


class ExpectationError(CRBoundError, ValueError):
    """The requested expectation backend is not available for this space."""


class SingularInformation(CRBoundError, ArithmeticError):
    """The Fisher information matrix is singular or indefinite at a point."""

    def __init__(self, message: str, at=None):
        super().__init__(message)
        self.at = at
