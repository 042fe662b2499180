"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError / FitError -> 4. Plain ValueError is reserved for caller
mistakes (bad arguments) and is not translated.
"""


class AgrivolError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AgrivolError):
    """Invalid or incomplete pipeline configuration."""


class DataError(AgrivolError):
    """Input data violates a contract (gaps, duplicates, bad values, misalignment)."""


class NumericError(AgrivolError):
    """A computation produced a non-finite or otherwise unusable number."""


class FitError(AgrivolError):
    """Model estimation could not produce a usable result."""


class StageError(AgrivolError):
    """A pipeline stage failed; carries the stage name, wraps the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
