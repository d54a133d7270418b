"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all pipeline-specific failures."""


class ConfigError(PipelineError):
    """A configuration value violates a precondition."""


class FormatError(PipelineError):
    """A serialized file is malformed; carries the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncationError(PipelineError):
    """A labeled trial window extends past the end of its recording."""


class NonFiniteError(PipelineError):
    """A loss or gradient became non-finite; the update was refused."""
