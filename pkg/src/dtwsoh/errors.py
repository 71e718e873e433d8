"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DtwSohError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DtwSohError, ValueError):
    """Input data violates a structural invariant (CLI exit code 1)."""


class NumericError(DtwSohError, ArithmeticError):
    """A numeric computation failed or diverged (CLI exit code 2)."""


# ingest
class MissingColumn(ValidationError):
    pass


class NonContiguousCycleIds(ValidationError):
    pass


class ChannelLengthMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


# dtw
class EmptySeries(ValidationError):
    pass


# sync
class EmptyDataset(ValidationError):
    pass


class UnknownReferenceId(ValidationError):
    pass


# nn
class ShapeMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NonFiniteActivation(NumericError):
    pass


class CheckpointMismatch(ValidationError):
    pass


# pipeline
class DegenerateSplit(ValidationError):
    pass


class CycleShorterThanTarget(ValidationError):
    pass


class DivisionByZero(NumericError, ZeroDivisionError):
    pass
