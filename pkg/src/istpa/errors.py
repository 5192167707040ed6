"""Exception types shared across the library."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ParameterError(ValueError):
    """A configuration value or operation parameter is invalid."""


class ContractError(RuntimeError):
    """A caller violated an operation's contract (bad label, non-scalar loss, ...)."""


class IntegrityError(RuntimeError):
    """A serialized artifact is corrupt, truncated, or inconsistent."""
