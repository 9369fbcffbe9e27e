"""Exception hierarchy shared by all modules."""


class BikeShareError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(BikeShareError, ValueError):
    """Invalid model or experiment parameters."""


class IntegrationError(BikeShareError, ArithmeticError):
    """An ODE solution left its validity region (e.g. negative mass)."""


class ConvergenceError(BikeShareError):
    """An iterative procedure did not converge within its budget."""


class CapacityError(BikeShareError):
    """A brute-force computation exceeded its size guard."""


class AlignmentError(BikeShareError, ValueError):
    """Time series that must share a grid do not."""


class NoExtremumError(BikeShareError):
    """A search window contains no interior extremum."""


class IngestError(BikeShareError):
    """Trip data could not be read or lacks required columns."""
