"""Exception types shared across the package."""


class QSSError(Exception):
    """Base class for all package errors."""


class CapacityError(QSSError):
    """Requested register exceeds the configured qubit cap."""


class ValidationError(QSSError, ValueError):
    """An input failed a numerical validity check (norm, unitarity, ...)."""


class ArgumentError(QSSError, ValueError):
    """Bad argument: index out of range, length mismatch, etc."""


class DiscriminationError(QSSError):
    """States handed to the discriminator are not mutually orthogonal."""


class InsufficientDataError(QSSError):
    """A witness term had no matching rounds to estimate it from."""

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


class InconsistentComboError(QSSError):
    """Basis combination carries no deterministic parity for the state."""


class NoKnowledgeError(QSSError):
    """The adversary holds no information about the requested round."""


class MeasurementError(QSSError):
    """A measurement branch with (numerically) zero weight was selected."""
