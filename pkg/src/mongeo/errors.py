"""Exception types raised across the package."""


class MongeoError(Exception):
    """Base class for all package errors."""


class ValidationError(MongeoError, ValueError):
    """Input data does not satisfy the invariants of its type."""


class BoundaryViolation(ValidationError):
    """A map does not fix 0 and 1."""


class MonotonicityViolation(ValidationError):
    """A map has a decreasing increment beyond round-off."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(MongeoError, ValueError):
    """An argument lies outside the domain of a function."""


class DegenerateDensity(MongeoError, ArithmeticError):
    """A cell density vanishes where the Fisher-Rao term needs it positive."""


class StepRejected(MongeoError):
    """A flow step broke monotonicity; the time step must be refined."""


class BlowupDetected(MongeoError):
    """Camassa-Holm evolution steepened beyond the resolvable range.

    ``partial`` holds the velocity field up to the last accepted step and
    ``energies`` the energy trace over the same time nodes.
    """

    def __init__(self, message, partial=None, energies=None, step=None):
        super().__init__(message)
        self.partial = partial
        self.energies = energies
        self.step = step
