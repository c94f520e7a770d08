"""Exception hierarchy shared by every module."""


class GWPruneError(Exception):
    """Base class for all library errors."""


class DomainError(GWPruneError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class NumericError(GWPruneError, ArithmeticError):
    """A numerical procedure diverged or failed to converge."""


class ParseError(GWPruneError, ValueError):
    """Malformed tree string or distribution literal."""


class ResourceError(GWPruneError, RuntimeError):
    """A combinatorial guard was exceeded."""


class DegenerateError(GWPruneError, ValueError):
    """Input is valid but too degenerate for the requested computation."""


class TruncatedError(GWPruneError, RuntimeError):
    """A sampling budget was exhausted.

    ``partial`` carries whatever was produced before the cap was hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
