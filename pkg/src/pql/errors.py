"""Error and diagnostic types shared across the toolchain.

Every user-facing failure carries a machine-readable code and, where the
source of the problem is a query, a 1-based line:column span.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class Span:
    """1-based source position of a token or AST node."""

    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class PqlError(Exception):
    """Base class for all toolchain errors."""

    code = "error"

    def __init__(self, message: str, span: Optional[Span] = None):
        self.message = message
        self.span = span
        super().__init__(f"{message} (at {span})" if span else message)

    def diagnostic(self) -> "Diagnostic":
        return Diagnostic(severity="error", code=self.code, span=self.span, message=self.message)


class LexError(PqlError):
    code = "lex"


class ParseError(PqlError):
    code = "parse"


class BindError(PqlError):
    """Semantic analysis failure. `code` is refined per error site."""

    code = "bind"

    def __init__(self, message: str, span: Optional[Span] = None, code: str = "bind"):
        super().__init__(message, span)
        self.code = code


class SchemaError(PqlError):
    code = "schema"


class DataError(PqlError):
    code = "data"


class PlanError(PqlError):
    code = "plan"


class ExecutionError(PqlError):
    code = "exec"


@dataclass
class Diagnostic:
    """Machine-readable diagnostic record emitted by the CLI."""

    severity: str
    code: str
    message: str
    span: Optional[Span] = field(default=None)

    def to_json(self) -> dict:
        out = {"severity": self.severity, "code": self.code, "message": self.message}
        if self.span is not None:
            out["line"] = self.span.line
            out["col"] = self.span.col
        return out

    def __str__(self) -> str:
        loc = f"{self.span} " if self.span else ""
        return f"{self.severity}: {loc}[{self.code}] {self.message}"
