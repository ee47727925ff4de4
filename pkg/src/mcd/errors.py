"""Exception hierarchy shared by all mcd modules.

The CLI maps these onto exit codes: usage/parse problems exit 2,
degenerate data exits 3, internal invariant violations exit 4.
"""


class McdError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(McdError):
    """Malformed or out-of-range input (bad shapes, out-of-bounds centers)."""


class GridParseError(InvalidInputError):
    """A grid file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigurationError(McdError):
    """Inconsistent or incomplete configuration (e.g. Binomial without trials)."""


class DegenerateDataError(McdError):
    """Data admits no meaningful analysis (all-zero counts, zero spread)."""


class NoSignalError(McdError):
    """The statistic field is constant, so no threshold can be selected."""


class UndefinedMetricError(McdError):
    """Sensitivity/specificity requested with an empty truth class."""


class InternalInvariantError(McdError):
    """A supposedly-impossible state was reached; indicates a bug."""
