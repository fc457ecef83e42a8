"""Exception types shared across the package."""


class PanelfitError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(PanelfitError):
    """Column schema does not match the data or the requested operation."""


class DuplicateKeyError(PanelfitError):
    """Two rows share the same key tuple."""


class RankDeficientError(PanelfitError):
    """Design matrix columns are collinear or constant; names the offenders."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("collinear or constant columns: " + ", ".join(self.columns))


class ConvergenceError(PanelfitError):
    """Iterative fit ran out of sweeps; carries the last iterate."""

    def __init__(self, message, last_coefficients=None, sweeps=None):
        super().__init__(message)
        self.last_coefficients = last_coefficients
        self.sweeps = sweeps
