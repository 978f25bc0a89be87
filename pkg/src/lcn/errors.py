"""Exception hierarchy shared by every lcn module."""

from __future__ import annotations

from dataclasses import dataclass


class LCNError(Exception):
    """Base class for all errors raised by the package."""


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class ParseError(LCNError):
    """Raised with one or more positioned diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class GroundingError(LCNError):
    pass


class CapacityError(LCNError):
    pass


class InfeasibleError(LCNError):
    pass


class UndefinedConditionalError(LCNError):
    pass


class InconsistencyError(LCNError):
    """A crossed interval (l > u) or an infeasible local program in BP."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class PreconditionError(LCNError):
    pass
