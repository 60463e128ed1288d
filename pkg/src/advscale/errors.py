"""Exception types shared across the toolkit.

The split matters for the CLI exit-code contract: usage problems exit 1,
data and fit problems exit 2.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(ToolkitError):
    """The caller asked for something malformed (bad flags, bad arguments)."""


class DataError(ToolkitError):
    """Input data is structurally valid but violates a documented contract."""


class ParseError(DataError):
    """A record file could not be parsed; message carries the line number."""


class InvariantError(DataError):
    """A parsed record violates a run-data invariant; names run_id and field."""


class CoverageError(DataError):
    """Label records do not cover the study corpus as required."""

    def __init__(self, message: str, image_ids: list[str] | None = None):
        super().__init__(message)
        self.image_ids = image_ids or []


class FitError(DataError):
    """A parametric fit failed; carries per-start diagnostics when available."""

    def __init__(self, message: str, diagnostics: list | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class InfeasibleError(DataError):
    """A requested trade-off point lies outside the feasible region."""
