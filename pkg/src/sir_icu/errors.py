"""Exception hierarchy.

Input problems derive from :class:`ValidationError`; failures of a numerical
procedure on valid input derive from :class:`NumericalError`. The CLI maps the
two families to exit codes 1 and 2.
"""


class SIRError(Exception):
    """Base class for all package errors."""


class ValidationError(SIRError, ValueError):
    """An argument violates a documented invariant."""


class NumericalError(SIRError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer."""


class DomainError(ValidationError):
    pass


class StepSizeInvalid(ValidationError):
    pass


class HorizonInvalid(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoViableLevel(ValidationError):
    pass


class NotInViableBand(ValidationError):
    pass


class OutsideViable(ValidationError):
    pass


class Infeasible(ValidationError):
    pass


class NeverReached(NumericalError):
    pass


class HorizonTooShort(NumericalError):
    pass


class MultipleContacts(NumericalError):
    pass


class NoRoot(NumericalError):
    pass


class SimplexViolation(RuntimeWarning):
    """Integrated state left the simplex by more than the diagnostic margin."""
