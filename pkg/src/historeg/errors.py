"""Exception types shared across the package.

Everything raised while parsing or validating input data derives from
DataError so callers (and the CLI) can treat the whole family uniformly.
Matcher process failures get their own branch because they map to a
different exit code.
"""


class HistoregError(Exception):
    """Base class for package-specific errors."""


class DataError(HistoregError):
    """Malformed, inconsistent, or insufficient input data."""


class MalformedRowError(DataError):
    """A CSV row that cannot be parsed (wrong arity or non-numeric field)."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonContiguousIndexError(DataError):
    """Landmark indices must run 0, 1, 2, ... without gaps."""


class BadMagicError(DataError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedPayloadError(DataError):
    """A binary payload is shorter (or longer) than its header promises."""


class CorruptPayloadError(DataError):
    """A binary payload decodes but contains invalid values."""


class UnsupportedFormatError(DataError):
    """An image file in a format outside the supported 8-bit subset."""


class DecodeFailureError(DataError):
    """An image file that cannot be decoded at all."""


class IoFailureError(DataError):
    """A filesystem error while reading or writing an artifact."""


class TooFewMatchesError(DataError):
    """An operation that needs more matches than were provided."""


class DegenerateGeometryError(DataError):
    """Collinear or otherwise degenerate point configurations."""


class SizeMismatchError(DataError):
    """Images or rasters whose dimensions do not agree."""


class LengthMismatchError(DataError):
    """Paired sequences of different lengths."""


class NoPairsError(LengthMismatchError):
    """An evaluation request with no landmark pairs at all."""


class MatcherUnavailableError(HistoregError):
    """The external matcher command failed or is missing."""
