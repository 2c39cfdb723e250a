"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class for all errors raised by logunc."""


class DecodeError(LabError):
    """A bit sequence is not a valid machine code.

    ``field`` names the part of the grammar that failed to parse.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class EncodeError(LabError):
    pass


class BudgetError(LabError):
    """A configured cap (pool size, exponent, state count) would be exceeded."""


class ScriptRangeError(LabError):
    """A scripted oracle was queried outside its declared index range."""


class ContractError(LabError):
    """Input violates a precondition of the operation."""


class ConfigError(LabError):
    """An experiment configuration failed validation."""
