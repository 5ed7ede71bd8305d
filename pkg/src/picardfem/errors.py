"""Exception hierarchy shared by the solver modules."""


class PicardFemError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(PicardFemError, ValueError):
    pass


class GeometryError(PicardFemError):
    """A simplex has zero or negative measure."""


class ModelConstructionError(PicardFemError):
    pass


class EllipticityError(PicardFemError):
    """A sampled coefficient matrix is not positive definite.

    The offending sample is kept on the exception so callers (and the CLI)
    can report where the assumption broke.
    """

    def __init__(self, message, z=None, x=None, eigenvalue=None):
        super().__init__(message)
        self.z = z
        self.x = x
        self.eigenvalue = eigenvalue


class RangeViolationError(PicardFemError):
    """A field or boundary trace leaves the admissible interval."""


class NumericalBreakdownError(PicardFemError):
    pass


class SolverError(PicardFemError):
    """An inner linear solve failed to converge."""


class MaxPrincipleViolationError(PicardFemError):
    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class OracleDomainError(PicardFemError):
    pass


class ConfigError(PicardFemError):
    """Malformed run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class ExperimentError(PicardFemError):
    """An experiment could not run; ``partial`` holds any rows already produced."""

    def __init__(self, message, partial=None, parameter=None):
        super().__init__(message)
        self.partial = partial
        self.parameter = parameter
