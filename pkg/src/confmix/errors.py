"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not line up; message names both shapes."""


class DomainError(ValueError):
    """Input outside an operation's documented domain (non-finite, off-simplex)."""


class ContractError(ValueError):
    """An operation was called in a way its contract forbids."""


class TapeStateError(RuntimeError):
    """Reverse pass requested for a value with no recorded computation."""


class GraphFormatError(ValueError):
    """Graph document cannot be parsed; message carries the byte offset."""


class GraphValidationError(ValueError):
    """Graph document parsed but a record violates the schema."""


class ConfigError(ValueError):
    """Invalid configuration or generator/verification parameters."""


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite; message names the epoch."""
