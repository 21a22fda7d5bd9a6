"""Exception types raised across the package."""


class BayesNamError(Exception):
    """Base class."""


class ConfigError(BayesNamError, ValueError):
    """Invalid configuration or argument value."""


class ShapeError(BayesNamError, ValueError):
    """Array dimensions do not line up."""


class MetricError(BayesNamError, ValueError):
    """A metric is undefined for the given inputs (e.g. AUC with one class)."""


class TrainingError(BayesNamError, RuntimeError):
    """Training diverged."""


class FormatError(BayesNamError, ValueError):
    """Malformed or incompatible file."""
