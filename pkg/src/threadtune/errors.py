"""Exception types shared across the package."""

from __future__ import annotations


class TuneError(Exception):
    """Base class for all threadtune errors."""


class SpaceError(TuneError):
    """A parameter space definition is invalid."""

    def __init__(self, message: str, param: str | None = None):
        super().__init__(message)
        self.param = param


class DuplicateName(SpaceError):
    pass


class EmptySpace(SpaceError):
    pass


class BadBounds(SpaceError):
    pass


class BadStep(SpaceError):
    pass


class AllRepeatsFailed(TuneError):
    """Every repeat of a measurement failed; nothing to aggregate."""


class DegenerateSpace(TuneError):
    """Space has fewer grid points than a simplex needs (n+1 vertices)."""


class NoSuccessfulEvaluation(TuneError):
    """Every evaluated point failed; no usable result."""


class ProtocolViolation(TuneError):
    """propose/observe called out of turn on a strategy."""


class UnknownPlaceholder(TuneError):
    """A command template references a parameter the space does not define."""

    def __init__(self, name: str):
        super().__init__(f"unknown placeholder {{{name}}}: no such parameter")
        self.name = name


class SpawnFailure(TuneError):
    """The benchmark command could not be started at all."""


class NoScoreMatch(TuneError):
    """The score pattern matched nothing in the command output."""


class UnparseableScore(TuneError):
    """The score pattern matched, but the capture is not a decimal number."""


class SpaceTooLarge(TuneError):
    """Space exceeds the enumeration guard for exact oracles."""


class BaselineFailed(TuneError):
    """The baseline point could not be evaluated successfully."""


class ConfigInvalid(TuneError):
    """A session configuration is not runnable."""


class SchemaError(TuneError):
    """A report file does not match the expected schema."""
