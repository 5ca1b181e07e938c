"""Exception types shared across the package."""


class PinlabError(Exception):
    """Base class for all package errors."""


class NumericalFailure(PinlabError):
    """A computation could not produce a certified result."""


class DivergentSum(NumericalFailure):
    """An excursion series diverges at the requested argument."""


class CapExceeded(NumericalFailure):
    """A size cap of an exact method was exceeded."""


class NoBracket(NumericalFailure):
    """A scanned interval does not straddle the sought crossing."""


class NotRecurrent(PinlabError):
    """The operation requires a recurrent excursion law."""


class Unsupported(PinlabError):
    """The law lies outside the hypotheses of the requested operation."""


class AtCriticalPoint(PinlabError):
    """The quantity is not defined at the critical point itself."""


class ConfigError(PinlabError):
    """Invalid experiment configuration."""
