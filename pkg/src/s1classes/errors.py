"""Exception hierarchy shared by all modules."""


class S1Error(Exception):
    """Base class for every error raised by the package."""


class DomainError(S1Error):
    """A point lies outside the closure of the domain, or a shape is invalid."""


class ResolutionError(S1Error):
    """The grid is too coarse for the requested domain or field."""


class GridError(S1Error):
    """Grids do not match, or a singular point sits on a grid node."""


class ParameterError(S1Error):
    """A map or experiment parameter is outside its admissible range."""


class SizeError(S1Error):
    """Instance is too large for an exhaustive routine."""


class NumericError(S1Error):
    """An iterative solver failed to produce a usable answer."""


class PreconditionError(S1Error):
    """An experiment precondition does not hold."""
