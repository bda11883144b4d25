"""Shared exception types."""


class PopverifError(Exception):
    """Base class for all toolkit errors."""


class ProtocolError(PopverifError):
    """Semantic problem with a protocol definition or its use."""


class ProtocolSyntaxError(ProtocolError):
    """Malformed protocol source, with 1-based line/column."""

    def __init__(self, message, line, column):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class FormulaError(PopverifError):
    """Semantic problem with a formula (unknown atom, bad quantification, ...)."""


class FormulaSyntaxError(FormulaError):
    """Malformed formula source, with 0-based token position."""

    def __init__(self, message, position):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class NotEnabledError(ProtocolError):
    """A transition was fired from a configuration where it is not activated."""


class ModeGateError(PopverifError):
    """Accelerated semantics requested outside its IOPP / X-free scope."""


class ResourceLimitError(PopverifError):
    """An explicit state/iteration/work cap was exceeded."""
