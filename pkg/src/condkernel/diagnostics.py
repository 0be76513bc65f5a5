from __future__ import annotations

import json
from dataclasses import dataclass

# Stable diagnostic codes. The first ten are the kernel's user-facing errors;
# the rest cover record literals, resource limits and checker self-checks.
CODES = (
    "ParseError",
    "UnknownName",
    "TypeMismatch",
    "NotCovering",
    "ConfluenceViolation",
    "IllegalIntervalSplit",
    "ArityMismatch",
    "DuplicateClause",
    "TerminationFailure",
    "UniverseHasNoType",
    "MissingField",
    "DuplicateField",
    "DuplicateDeclaration",
    "AmbiguousConstructor",
    "FuelExhausted",
    "InternalShape",
    "IOError",
)

Span = tuple[int, int]


@dataclass
class Diagnostic:
    code: str
    message: str
    span: Span | None = None
    severity: str = "error"
    expected: str | None = None
    actual: str | None = None

    def __post_init__(self):
        if self.code not in CODES:
            raise ValueError(f"unknown diagnostic code {self.code}")

    def to_json(self, text: str | None = None) -> str:
        """One JSON line; ``text`` converts character offsets to byte offsets."""
        span = self.span
        if span is not None and text is not None:
            span = (len(text[: span[0]].encode()), len(text[: span[1]].encode()))
        obj = {"code": self.code, "span": list(span) if span else None, "message": self.message}
        if self.expected is not None:
            obj["expected"] = self.expected
        if self.actual is not None:
            obj["actual"] = self.actual
        return json.dumps(obj, ensure_ascii=False)

    def render(self, path: str = "<input>", text: str | None = None) -> str:
        where = path
        if self.span is not None and text is not None:
            line = text.count("\n", 0, self.span[0]) + 1
            col = self.span[0] - (text.rfind("\n", 0, self.span[0]) + 1) + 1
            where = f"{path}:{line}:{col}"
        out = f"{where}: {self.severity}[{self.code}]: {self.message}"
        if self.expected is not None:
            out += f"\n  expected: {self.expected}"
        if self.actual is not None:
            out += f"\n  actual:   {self.actual}"
        return out


class KernelError(Exception):
    """Raised by the parser and checker; carries one diagnostic."""

    def __init__(self, diag: Diagnostic):
        super().__init__(f"{diag.code}: {diag.message}")
        self.diag = diag

    @property
    def code(self) -> str:
        return self.diag.code


def fail(code: str, message: str, span: Span | None = None, **kw) -> KernelError:
    return KernelError(Diagnostic(code, message, span, **kw))
