"""Causal dose-response curves and their derivatives without positivity.

Estimates the dose-response curve m(t) and its derivative theta(t) from
observational data with a continuous treatment, using a localized
derivative estimator plus an integral estimator that stays consistent where
the positivity condition fails, together with bootstrap confidence
intervals and uniform bands, rule-of-thumb bandwidth selection, simulation
benchmarks with analytic truth, and partial-identification bounds for the
degenerate-treatment case.
"""

__version__ = "0.1.0"

from .bandwidth import (
    ROTInputs,
    curvature_hat,
    default_params,
    nr_bandwidth,
    residual_variance_hat,
    rot_bandwidths,
    rot_inputs,
)
from .bootstrap import BootstrapResult, bootstrap_curves, confidence_band, resample
from .bounds import Interval, LevelSetSample, m_bound, theta_bound
from .condcdf import NWWeights, cond_cdf, nw_weights
from .errors import (
    AllFitsFailed,
    BootstrapFailure,
    DegenerateWeights,
    EmptyData,
    EmptyInterval,
    InsufficientData,
    InvalidScale,
    MissingColumn,
    NoLocalData,
    NpdoseError,
    ParseError,
    ZeroGradient,
    ZeroVariance,
)
from .estimators import (
    CurveEstimate,
    estimate_all,
    m_RA,
    m_RA_curve,
    m_theta_curve,
    m_theta_fast,
    m_theta_interpolate,
    m_theta_quadrature_oracle,
    theta_C_at,
    theta_C_curve,
    theta_RA,
    theta_RA_curve,
)
from .kernels import KernelKind, eval_kernel, kernel_moment, kernel_sq_moment, product_kernel_weight
from .locpoly import Dataset, EstimParams, LocalFit, beta2_hat, build_design_row, local_fit, mu_hat
from .simdata import SIM_MODELS, SimModel, gen_linear_conf, gen_nonlinear_conf, gen_single_conf, generate

__all__ = [name for name in dir() if not name.startswith("_")]
