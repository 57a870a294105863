"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class RepalignError(Exception):
    """Base class for all library errors."""


class ArgumentError(RepalignError, ValueError):
    """Invalid parameters or preconditions (CLI exit code 2)."""


class DataError(RepalignError):
    """Input data is unusable (CLI exit code 3)."""


class FormatError(DataError):
    """A file does not parse under its declared format."""


class DegenerateInputError(DataError):
    """A metric is undefined for the given input (e.g. zero variance)."""
