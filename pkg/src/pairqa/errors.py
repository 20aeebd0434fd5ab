"""Exception types shared across the pipeline."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for recoverable pipeline failures (item-level, not fatal)."""


class ContractViolation(ValueError):
    """A caller broke a documented precondition or invariant."""


class TransportError(PipelineError):
    """A remote call failed after exhausting its retry budget."""

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class ProtocolError(PipelineError):
    """A remote service answered with a malformed or incomplete body."""


class MissingScoreError(PipelineError):
    """A file-backed score store has no entry for the requested key."""

    def __init__(self, key: tuple):
        super().__init__(f"no stored score for key {key!r}")
        self.key = key
