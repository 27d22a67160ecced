"""Exception hierarchy shared by the simulator modules."""


class IotmonError(Exception):
    """Base class for all simulator errors."""


class ConfigError(IotmonError):
    """Invalid simulation or frame configuration."""


class ConfigParseError(ConfigError):
    """A config file or override could not be parsed."""

    def __init__(self, message, *, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class NotPositiveDefinite(IotmonError):
    """Covariance matrix has a non-positive leading minor."""


class SingularGain(IotmonError):
    """Observed sensor has (numerically) zero prior variance."""


class TimeMismatch(IotmonError):
    """Estimator and true process refer to different slots."""


class NumericalError(IotmonError):
    """Error covariance lost positive semidefiniteness beyond tolerance."""


class NoSamples(IotmonError):
    """A run contained no slots, so no MSE is defined."""


class EmptySweep(ConfigError):
    """A sweep axis or grid has no values."""


class NoFeasiblePoint(IotmonError):
    """No grid point satisfies the energy budget."""
