"""Rule-of-thumb bandwidth selection.

``rot_bandwidths`` implements the scaled rule-of-thumb for the local
polynomial bandwidths (treatment bandwidth h and per-coordinate covariate
bandwidths b), driven by a global quartic pilot fit; ``nr_bandwidth`` is the
normal-reference rule for the conditional-CDF bandwidth. Estimators never
select bandwidths on their own: callers either pass explicit values or use
`default_params` and get the choices reported back.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InvalidScale, ZeroVariance
from .kernels import KernelKind, kernel_moment, kernel_sq_moment
from .locpoly import Dataset, EstimParams

__all__ = [
    "ROTInputs",
    "residual_variance_hat",
    "curvature_hat",
    "rot_inputs",
    "rot_bandwidths",
    "nr_bandwidth",
    "default_params",
]

# Flat responses would send the rule-of-thumb bandwidth to infinity.
_CURVATURE_FLOOR = 1e-8


@dataclass(frozen=True)
class ROTInputs:
    """Every ingredient of the rule-of-thumb displays, for inspection.

    ``curvature`` holds the treatment-coordinate estimate followed by one
    entry per covariate coordinate (all floored away from zero); ``ranges``
    likewise holds the observed treatment range then the coordinatewise
    covariate ranges.
    """

    C_h: float
    C_b: float
    rhat: float
    curvature: np.ndarray
    ranges: np.ndarray


def _check_pilot_size(data: Dataset):
    if data.n <= 9 + data.d:
        raise InsufficientData(
            f"global quartic pilot fit needs n > {9 + data.d}, got n={data.n}"
        )


def _quartic_design(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xc = x - x.mean()
    return np.vander(xc, 5, increasing=True), xc


def residual_variance_hat(data: Dataset) -> float:
    """Residual variance of a global quartic-in-T, linear-in-S fit.

    Unweighted least squares on the basis (1, T-Tbar, ..., (T-Tbar)^4,
    S-Sbar), with the residual sum of squares divided by n - 5.
    """
    _check_pilot_size(data)
    design, _ = _quartic_design(data.t)
    if data.d:
        design = np.column_stack([design, data.s - data.s.mean(axis=0)])
    coef, _, _, _ = np.linalg.lstsq(design, data.y, rcond=None)
    resid = data.y - design @ coef
    return float(resid @ resid / (data.n - 5))


def _sq_curvature(x: np.ndarray, y: np.ndarray) -> float:
    """Average squared second derivative of a global univariate quartic fit."""
    design, xc = _quartic_design(x)
    c, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    second = 2.0 * c[2] + 6.0 * c[3] * xc + 12.0 * c[4] * xc * xc
    return float(np.mean(second * second))


def curvature_hat(data: Dataset) -> tuple[float, np.ndarray]:
    """Density-weighted curvature estimates for T and each covariate coordinate.

    Each coordinate gets its own global quartic regression of Y; the
    estimate is the sample average of the squared second derivative.
    """
    _check_pilot_size(data)
    c_t = _sq_curvature(data.t, data.y)
    c_s = np.array([_sq_curvature(data.s[:, j], data.y) for j in range(data.d)])
    return c_t, c_s


def rot_inputs(data: Dataset, C_h: float = 10.0, C_b: float = 15.0) -> ROTInputs:
    """Collect the data-driven ingredients of the rule-of-thumb formulas."""
    if not C_h > 0 or not C_b > 0:
        raise InvalidScale("scaling constants C_h and C_b must be > 0")
    r_hat = residual_variance_hat(data)
    c_t, c_s = curvature_hat(data)
    curvature = np.maximum(np.concatenate([[c_t], c_s]), _CURVATURE_FLOOR)
    ranges = np.concatenate(
        [[data.t.max() - data.t.min()], data.s.max(axis=0) - data.s.min(axis=0)]
        if data.d
        else [[data.t.max() - data.t.min()]]
    )
    return ROTInputs(C_h=float(C_h), C_b=float(C_b), rhat=r_hat, curvature=curvature, ranges=ranges)


def rot_bandwidths(
    data: Dataset, C_h: float = 10.0, C_b: float = 15.0, scale_by_sd: bool = False
) -> tuple[float, np.ndarray]:
    """Rule-of-thumb bandwidths (h, b) using Epanechnikov kernel moments.

    ``scale_by_sd`` additionally multiplies h and each b_j by the sample
    standard deviation of the matching column, which compensates for scale
    differences between the treatment and the covariates.
    """
    inputs = rot_inputs(data, C_h=C_h, C_b=C_b)
    nu0 = kernel_sq_moment(KernelKind.EPANECHNIKOV, 0)
    kappa2 = kernel_moment(KernelKind.EPANECHNIKOV, 2)
    n, d = data.n, data.d
    r_hat = inputs.rhat
    c_t = inputs.curvature[0]

    h = C_h * (nu0**2 * r_hat * inputs.ranges[0] / (4.0 * kappa2**2 * c_t * n)) ** 0.2
    if d:
        bracket = (
            d * nu0 ** (2 * d) * r_hat * inputs.ranges[1:] / (4.0 * kappa2**2 * inputs.curvature[1:])
        )
        b = C_b * bracket ** (-1.0 / (d + 5)) * n ** (-1.0 / (d + 1))
    else:
        b = np.empty(0)
    if scale_by_sd:
        h *= float(data.t.std(ddof=1))
        if d:
            b = b * data.s.std(axis=0, ddof=1)
    if not h > 0 or (d and not (b > 0).all()):
        raise InvalidScale("rule-of-thumb produced a non-positive bandwidth")
    return h, b


def nr_bandwidth(tvec) -> float:
    """Normal-reference bandwidth (4/(3n))^(1/5) * sd(T) for the CDF kernel."""
    tvec = np.asarray(tvec, dtype=np.float64)
    n = tvec.shape[0]
    if n < 2:
        raise ZeroVariance("normal-reference rule needs at least two observations")
    sd = float(tvec.std(ddof=1))
    if sd == 0.0:
        raise ZeroVariance("treatment values are constant")
    return (4.0 / (3.0 * n)) ** 0.2 * sd


def default_params(
    data: Dataset,
    C_h: float = 10.0,
    C_b: float = 15.0,
    q: int = 2,
    scale_by_sd: bool = False,
    trim_lo: float = 0.0,
    trim_hi: float = 1.0,
    h: float | None = None,
    b=None,
    hbar: float | None = None,
) -> EstimParams:
    """Bundle rule-of-thumb choices into EstimParams, honoring overrides."""
    if h is None or (b is None and data.d):
        rot_h, rot_b = rot_bandwidths(data, C_h=C_h, C_b=C_b, scale_by_sd=scale_by_sd)
    if h is None:
        h = rot_h
    if b is None:
        b = rot_b if data.d else ()
    if hbar is None:
        hbar = nr_bandwidth(data.t)
    return EstimParams(h=h, b=tuple(np.atleast_1d(b)) if data.d else (), hbar=hbar, q=q,
                       trim_lo=trim_lo, trim_hi=trim_hi)
