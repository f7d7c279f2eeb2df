"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: usage errors exit 1, data
errors exit 2, numeric failures exit 3.
"""


class NeurodecodeError(Exception):
    """Base class for all package-raised errors."""


class UsageError(NeurodecodeError):
    """Bad command-line usage or invalid configuration."""


class DataError(NeurodecodeError):
    """Malformed, missing or inconsistent data files."""


class BadMagicError(DataError):
    """Container file does not start with the expected magic bytes."""


class VersionMismatchError(DataError):
    """Container file declares an unsupported format version."""


class TruncatedPayloadError(DataError):
    """Container payload is shorter than its header promises."""


class MetaMismatchError(DataError):
    """Sidecar metadata disagrees with the tensor header."""


class NumericError(NeurodecodeError):
    """Non-finite values or a numerically failed computation."""
