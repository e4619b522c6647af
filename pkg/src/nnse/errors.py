"""Exception hierarchy for the engine.

Every error carries a stable short ``code`` used in CLI output and JSON
reports, so callers can match on it without parsing messages.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    code = "EngineError"

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class MissingFileError(EngineError):
    code = "MissingFile"


class MalformedJsonError(EngineError):
    code = "MalformedJson"


class ShapeMismatchError(EngineError):
    code = "ShapeMismatch"

    def __init__(self, message: str, layer: int | None = None,
                 expected: object = None, found: object = None):
        super().__init__(message)
        self.layer = layer
        self.expected = expected
        self.found = found


class NonFiniteParameterError(EngineError):
    code = "NonFiniteParameter"

    def __init__(self, message: str, layer: int | None = None,
                 offset: int | None = None):
        super().__init__(message)
        self.layer = layer
        self.offset = offset


class NonFiniteActivationError(EngineError):
    code = "NonFiniteActivation"


class EmptyDatasetError(EngineError):
    code = "EmptyDataset"


class UnboundVariableError(EngineError):
    code = "UnboundVariable"


class NonlinearTermError(EngineError):
    code = "NonlinearTerm"


class StackUnderflowError(EngineError):
    code = "StackUnderflow"


class ModelIOError(EngineError):
    code = "IoError"
