"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError (and subclasses) -> 3.
"""


class MapvolError(Exception):
    """Base class for all package errors."""


class ConfigError(MapvolError):
    """Invalid configuration file or command-line usage."""


class DataError(MapvolError):
    """Malformed or insufficient input data."""


class NumericalError(MapvolError):
    """A numerical procedure failed (estimation, forecasting, bootstrap)."""


class ModelError(NumericalError):
    """Parameter values violate a model constraint."""


class EstimationError(NumericalError):
    """Quasi-maximum-likelihood estimation failed."""


class ForecastError(NumericalError):
    """Forecast or impulse-response computation failed."""


class EvaluationError(NumericalError):
    """Out-of-sample evaluation or model confidence set failed."""


class SimulationError(NumericalError):
    """Data generation failed (e.g. positivity violated along the path)."""
