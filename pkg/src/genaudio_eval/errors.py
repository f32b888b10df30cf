"""Exception hierarchy shared across the toolkit.

Data problems (unreadable files, format violations, pairing failures) and
numeric failures (non-PSD matrices, non-finite scores) are separate branches
because the CLI maps them to distinct exit codes.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class UsageError(ToolkitError):
    """Bad command-line invocation. CLI exit code 1."""


class DataError(ToolkitError):
    """Problem with input data or file formats. CLI exit code 2."""


class NumericError(ToolkitError):
    """Numerical failure during metric computation. CLI exit code 3."""


class InvariantError(DataError):
    """A domain object failed its own consistency checks."""
