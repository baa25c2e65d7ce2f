"""Exception types shared across the package."""


class DeconvError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(DeconvError):
    """A grid, config or parameter choice is invalid for the requested task."""


class NumericalError(DeconvError):
    """A quadrature or inversion failed to reach its tolerance.

    The offending residual, when known, is attached as ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PartialResultError(DeconvError):
    """An operation succeeded only at a subset of the requested points."""

    def __init__(self, message, bad_indices=()):
        super().__init__(message)
        self.bad_indices = tuple(bad_indices)


class NoAnalyticTruth(DeconvError):
    """The scenario has no closed-form marginal density/hazard."""


class ClassificationError(DeconvError):
    """Hazard shape classification received non-finite values."""


class InputDataError(DeconvError):
    """An input data file is missing, empty or unparseable."""


class CellFailureError(DeconvError):
    """Too many replications failed inside one or more simulation cells."""

    def __init__(self, message, failed_cells=()):
        super().__init__(message)
        self.failed_cells = tuple(failed_cells)
