"""Nonparametric mean and median regression from censored and truncated data.

The estimators work through the conditional hazard: kernel occurrence and
exposure give a hazard surface, its integrated version gives a conditional
survivor, and the regression curve is a functional of that survivor. Under
a multiplicative error model a two-step estimator pools a common baseline
hazard and re-fits the location at each covariate value.
"""

from .data import EventRecord, Sample, from_right_censored, from_truncated_censored, read_csv, write_csv
from .errors import (
    DataError,
    FiltRegError,
    HazardUndefinedInWeightSupport,
    MinimizerError,
    QuantileUndefined,
    ShapeUndefined,
    SingularDesign,
    ZeroExposure,
)
from .hazard import LocalConstantHazard, LocalLinearHazard, hazard_lc, hazard_ll
from .kernels import EPANECHNIKOV, QUARTIC, TRIWEIGHT, Kernel, get_kernel
from .regression import CurveEstimate, estimate_curve, mean_truncated, quantile
from .shape import TwoStepConfig, WeightFunction, fit_two_step, two_step
from .survivor import StepFunction, integrated_hazard_lc, integrated_hazard_ll, product_limit

__version__ = "0.1.0"
