"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and DataError to exit code 3;
everything else is a plain crash.
"""


class SvtasError(Exception):
    """Base class for package errors."""


class ConfigError(SvtasError):
    """Invalid configuration: bad field values, shape mismatches against a
    checkpoint, malformed config files."""


class DataError(SvtasError):
    """Invalid dataset on disk: missing files, unknown class names,
    frame/label count mismatches."""


class VocabularyError(ConfigError):
    """Prompt vocabulary construction or lookup failed."""


class StreamProtocolError(SvtasError):
    """Chunks fed to a streaming session out of order, or a cache with the
    wrong shape was supplied."""
