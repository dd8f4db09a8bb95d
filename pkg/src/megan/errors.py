"""Exception types raised across the package."""


class MeganError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MeganError):
    """A text input file could not be parsed."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class BoundsError(MeganError):
    """A node, view, or label id is outside its declared range."""


class EmptyGraphError(MeganError):
    """The union of all views contains no edge."""


class InvalidPairError(MeganError):
    """A node pair violates a precondition (e.g. i == j)."""


class ArgumentError(MeganError):
    """An argument value is invalid."""


class ShapeError(MeganError):
    """Array dimensions do not match."""


class NumericError(MeganError):
    """A computation produced or received a non-finite value."""


class CannotSampleError(MeganError):
    """The graph is too small to draw the requested sample."""


class SplitError(MeganError):
    """A train/test or edge-holdout split cannot be constructed."""
