"""Secret-key rate bounds for two-way reciprocal block-fading channels."""

__version__ = "0.1.0"

from .expectation import EvalConfig, EvalResult, Functional, evaluate, gamma_constant
from .fading import ChannelParams, GainSample, RngStream, sample_gain_tuple
from .gaussian_info import CovarianceModel, gaussian_mi
from .optimize import OptimizeReport, OptimizeSpec, corollary_schedule, optimize_scheme
from .rates import (
    RateBreakdown,
    RncModel,
    SchemeParams,
    SystemParams,
    optimize_power_allocation,
    rate_lower_nodisc,
    rate_lower_pd,
    rate_nc,
    rate_training,
    rate_upper,
)

__all__ = [
    "ChannelParams",
    "CovarianceModel",
    "EvalConfig",
    "EvalResult",
    "Functional",
    "GainSample",
    "OptimizeReport",
    "OptimizeSpec",
    "RateBreakdown",
    "RncModel",
    "RngStream",
    "SchemeParams",
    "SystemParams",
    "corollary_schedule",
    "evaluate",
    "gamma_constant",
    "gaussian_mi",
    "optimize_power_allocation",
    "optimize_scheme",
    "rate_lower_nodisc",
    "rate_lower_pd",
    "rate_nc",
    "rate_training",
    "rate_upper",
    "sample_gain_tuple",
]
