"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: config problems exit 2, data
problems exit 3, numeric failures exit 4.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(PipelineError):
    """Invalid run configuration or command usage."""

    exit_code = 2


class DataError(PipelineError):
    """Malformed, inconsistent, or incompatible data."""

    exit_code = 3


class ParseError(DataError):
    """A file could not be parsed; messages name the offending line."""


class ValidationError(DataError):
    """Parsed data violates an invariant (duplicate ids, bad labels, ...)."""


class AlignmentError(DataError):
    """Two tables share no segment ids."""


class NumericError(PipelineError):
    """A numeric computation produced a non-finite or unusable result."""

    exit_code = 4
