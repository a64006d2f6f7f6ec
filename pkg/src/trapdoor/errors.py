"""Exception hierarchy shared by the library and the command line."""


class TrapdoorError(Exception):
    """Base class for every error raised deliberately by this package."""


class StructuralError(TrapdoorError, ValueError):
    """A value does not have the shape its container requires."""


class ContractError(TrapdoorError, ValueError):
    """Arguments are individually well formed but violate an operation's precondition."""


class CapabilityError(TrapdoorError):
    """The request is valid but beyond what the exact routines will enumerate."""


class ConfigError(ContractError):
    """Invalid sweep configuration or learner identifier."""


class DatasetFormatError(StructuralError):
    """A dataset file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}:"
        if line is not None:
            prefix += f"line {line}: "
        elif prefix:
            prefix += " "
        super().__init__(prefix + message)


class OutputError(TrapdoorError, OSError):
    """Writing results failed; the message carries the offending path."""
