"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CrlError(Exception):
    """Base class for all errors raised by this package."""


class Conflict(CrlError):
    def __init__(self, var: str, left: str, right: str):
        super().__init__(f"conflicting bindings for {var}: {left} vs {right}")
        self.var = var


class ZeroMass(CrlError):
    """Normalizing a weight table whose total is zero."""


class ZeroEvidence(ZeroMass):
    """Conditioning on an event of probability zero."""


class UnknownVariable(CrlError):
    def __init__(self, name: str):
        super().__init__(f"unknown variable {name!r}")
        self.name = name


class CycleDetected(CrlError):
    def __init__(self, cycle: list[str]):
        super().__init__("cycle: " + " -> ".join(cycle))
        self.cycle = cycle


class IncompleteAssignment(CrlError):
    pass


class DomainViolation(CrlError):
    pass


class TooLarge(CrlError):
    pass


class CriterionViolated(CrlError):
    pass


class Unsolvable(CrlError):
    pass


class ClosureTooLarge(CrlError):
    pass


class NotExecutable(CrlError):
    pass


class UnsupportedQuery(CrlError):
    pass


class ModelError(CrlError):
    """A structurally invalid model (bad CPT, missing mechanism, role misuse)."""


class ParseError(CrlError):
    """Syntax error with a 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += " (expected " + ", ".join(self.expected) + ")"
        super().__init__(text)


class SemanticError(ParseError):
    """Well-formed text describing an invalid model."""


class RowNotNormalized(SemanticError):
    pass


class QueryError(ParseError):
    """Parsed query violating the disjointness rules."""
