"""Exception hierarchy shared by every module."""

from __future__ import annotations


class DiagnosticError(Exception):
    """Base class for all errors raised by vlmdiag."""


class ParameterError(DiagnosticError, ValueError):
    """An argument is outside its documented domain."""


class CapacityError(DiagnosticError):
    """Input exceeds what an exact solver is willing to handle."""


class GenerationError(DiagnosticError):
    """A generator could not produce an instance for the requested parameters."""


class DatasetError(DiagnosticError):
    """A dataset or rollout file line could not be decoded."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(DiagnosticError):
    """A model response does not follow the delimited output format."""

    def __init__(self, message: str, block: str | None = None):
        self.block = block
        super().__init__(message)


class PerceptionParseError(ParseError):
    """A perception segment does not match the task grammar."""


class PolicyError(DiagnosticError):
    """A policy failed to produce a response."""

    def __init__(self, message: str, rollout_index: int | None = None):
        self.rollout_index = rollout_index
        if rollout_index is not None:
            message = f"rollout {rollout_index}: {message}"
        super().__init__(message)


class TransportError(PolicyError):
    """The policy endpoint could not be reached or dropped the connection."""


class PolicyTimeout(TransportError):
    """The policy endpoint did not answer in time."""


class ContractViolation(PolicyError):
    """The policy answered, but broke the generate() contract."""


class RewardError(DiagnosticError):
    """A surrogate reward could not be computed."""
