"""Exception types raised across the library.

Every estimation failure maps to one of these so that callers (and the CLI)
can distinguish recoverable conditions from bad inputs.
"""


class NpdoseError(Exception):
    """Base class for all library errors."""


class NoLocalData(NpdoseError):
    """A local fit received zero total kernel weight.

    Happens when every observation falls outside the compact kernel window;
    callers should widen bandwidths or skip the evaluation point.
    """


class DegenerateWeights(NpdoseError):
    """All conditional-CDF kernel weights underflowed to zero."""


class AllFitsFailed(NpdoseError):
    """Every local fit at an evaluation point (or on a whole grid) failed."""


class InsufficientData(NpdoseError):
    """Too few observations for the requested global polynomial fit."""


class InvalidScale(NpdoseError):
    """A bandwidth scaling constant was not strictly positive."""


class ZeroVariance(NpdoseError):
    """The treatment values are constant, so no data-driven bandwidth exists."""


class EmptyInterval(NpdoseError):
    """A partial-identification bound came out empty for the supplied slack."""


class ZeroGradient(NpdoseError):
    """A derivative bound requires dividing by a zero treatment gradient."""


class BootstrapFailure(NpdoseError):
    """More than the tolerated share of bootstrap replicates failed."""


class MissingColumn(NpdoseError):
    """A mapped CSV column is absent from the header."""


class ParseError(NpdoseError):
    """A CSV cell failed strict numeric parsing."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EmptyData(NpdoseError):
    """A CSV file contained a header but no usable rows."""
