"""Exception hierarchy shared across the toolkit.

The CLI maps these onto stable exit codes, so new error kinds should
subclass one of the classes below rather than raising bare ValueErrors
for user-facing failures.
"""


class PipelineError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1
    error_class = "pipeline"


class ConfigError(PipelineError):
    """Invalid configuration value or file."""

    exit_code = 3
    error_class = "invalid-config"


class MissingInputError(PipelineError):
    """A required input file or directory does not exist."""

    exit_code = 4
    error_class = "missing-input"


class AnnotationError(PipelineError):
    """Malformed annotation document or degenerate shape."""

    exit_code = 4
    error_class = "bad-annotation"
