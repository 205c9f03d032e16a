"""Exception hierarchy shared across the engine.

Exit-code mapping (used by the CLI): invalid input / parse problems map to 2,
numerical degeneracy to 3, filesystem trouble to 4.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidInputError(EngineError):
    """Malformed or out-of-contract input values."""


class ShapeError(InvalidInputError):
    """Array dimensions inconsistent with the operation's contract."""


class ConfigurationError(InvalidInputError):
    """Configuration incomplete or self-contradictory (e.g. external mode without a matrix)."""


class DegenerateConfigurationError(EngineError):
    """Point configuration does not determine a transformation (rank deficiency)."""


class FormatError(InvalidInputError):
    """A serialized artifact (weight file, points document, flow file) failed to parse."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{message} (field: {field})")
        self.field = field
