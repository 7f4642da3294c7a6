"""Exception types raised by the estimators."""


class FiltRegError(Exception):
    """Base class for all package errors."""


class DataError(FiltRegError, ValueError):
    """Malformed or inconsistent input data."""


class ZeroExposure(FiltRegError):
    """Hazard requested where the exposure falls below the floor."""


class SingularDesign(FiltRegError):
    """Local-linear moment matrix is singular or badly conditioned."""


class QuantileUndefined(FiltRegError):
    """Survivor function never drops to the requested level."""


class HazardUndefinedInWeightSupport(FiltRegError):
    """Criterion integrand needs a hazard value that does not exist."""


class ShapeUndefined(FiltRegError):
    """Pooled baseline-hazard ratio has a vanishing denominator."""


class MinimizerError(FiltRegError):
    """Objective returned a non-finite value during a line search."""
