"""Error hierarchy shared across the toolchain.

Every diagnostic that originates from source text carries a line and a
column (1-based) so callers can point at the offending spot.
"""

from __future__ import annotations


class SthlError(Exception):
    """Base class for all toolchain errors."""


class SourceError(SthlError):
    """An error anchored to a position in a source file."""

    def __init__(self, message: str, line: int, column: int, filename: str = "<sthl>"):
        super().__init__(f"{filename}:{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.filename = filename


class LexError(SourceError):
    """Illegal token in the input text."""


class ParseError(SourceError):
    """Input violates the grammar."""


class ResolveError(SourceError):
    """Undeclared or duplicate identifier."""


class TypeCheckError(SourceError):
    """Expression or statement violates the type rules."""


class EvalError(SthlError):
    """A constraint could not be evaluated (missing object, bad path)."""


class PlacementError(SthlError):
    """An object cannot fit in its assigned region."""


class WeightError(SthlError):
    """Retrieval weights are degenerate (sum to zero)."""


class NoAssetError(SthlError):
    """No database candidates and no generator to fall back to."""


class AssetMismatch(SthlError):
    """An asset handle lacks the geometry metadata needed for export."""


class DegenerateRegion(SthlError):
    """Region polygon has non-positive area."""


class DimensionError(SthlError):
    """Embedding vectors disagree in length."""


class FormatError(SthlError):
    """A scene package file is malformed or internally inconsistent."""


class IoError(SthlError):
    """Filesystem failure while reading or writing a package."""
