"""Dose-response curve estimators.

Four estimators share one computational core (`_engine.grid_fit_summary`):

* ``theta_C``: derivative of the dose-response curve at t, averaging local
  derivative fits with conditional-CDF kernel weights centered at t.
* ``m_theta``: the integral estimator of the curve itself, anchoring at the
  outcome mean and integrating ``theta_C`` from each observed treatment to
  the target level via an O(n) Riemann form over the order statistics.
* ``m_RA`` / ``theta_RA``: the naive regression-adjustment baselines that
  average the local fits uniformly over all observed covariates. They are
  kept for comparison; they destabilize wherever positivity fails.
"""

from dataclasses import dataclass, field

import numpy as np

from ._engine import GridFitSummary, grid_fit_summary
from .errors import AllFitsFailed, DegenerateWeights
from .locpoly import Dataset, EstimParams

__all__ = [
    "ESTIMATOR_TAGS",
    "CurveEstimate",
    "theta_C_at",
    "m_RA",
    "theta_RA",
    "theta_C_curve",
    "m_RA_curve",
    "theta_RA_curve",
    "m_theta_fast",
    "m_theta_curve",
    "m_theta_interpolate",
    "m_theta_quadrature_oracle",
    "estimate_all",
]

ESTIMATOR_TAGS = ("theta_C", "m_theta", "m_RA", "theta_RA")


@dataclass(frozen=True)
class CurveEstimate:
    """An estimated curve on a strictly increasing treatment grid.

    ``skipped`` flags grid points where no value could be produced (their
    entry in ``values`` is NaN). ``diagnostics`` carries counts such as
    dropped local fits; it never affects the numbers.
    """

    grid: np.ndarray
    values: np.ndarray
    estimator_tag: str
    params_used: EstimParams
    skipped: np.ndarray = None  # type: ignore[assignment]
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-D with matching shapes")
        if grid.shape[0] and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.estimator_tag not in ESTIMATOR_TAGS:
            raise ValueError(f"unknown estimator tag {self.estimator_tag!r}")
        skipped = self.skipped
        if skipped is None:
            skipped = ~np.isfinite(values)
        skipped = np.asarray(skipped, dtype=bool)
        if not np.isfinite(values[~skipped]).all():
            raise ValueError("values must be finite at every retained grid point")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "skipped", skipped)


# ---------------------------------------------------------------------------
# Pointwise estimators
# ---------------------------------------------------------------------------


def theta_C_at(data: Dataset, t: float, params: EstimParams) -> float:
    """Localized derivative estimate at one treatment level.

    Weighted average of the local derivative fits beta2(t, S_i) with
    conditional-CDF kernel weights; observations whose local fit has no
    data in its kernel window are dropped from both sums.

    Raises:
        DegenerateWeights: the CDF kernel weights all underflowed at t.
        AllFitsFailed: every local fit at t failed.
    """
    summary = grid_fit_summary(data, [float(t)], params)
    if summary.nw_degenerate[0]:
        raise DegenerateWeights(f"conditional-CDF weights vanish at t={t!r}")
    if summary.all_failed[0]:
        raise AllFitsFailed(f"every local fit failed at t={t!r}")
    return float(summary.theta_c[0])


def m_RA(data: Dataset, t: float, params: EstimParams) -> float:
    """Regression-adjustment estimate of the curve at t (mean of mu-hat)."""
    summary = grid_fit_summary(data, [float(t)], params)
    if summary.all_failed[0]:
        raise AllFitsFailed(f"every local fit failed at t={t!r}")
    return float(summary.m_ra[0])


def theta_RA(data: Dataset, t: float, params: EstimParams) -> float:
    """Regression-adjustment estimate of the derivative at t (mean of beta2-hat)."""
    summary = grid_fit_summary(data, [float(t)], params)
    if summary.all_failed[0]:
        raise AllFitsFailed(f"every local fit failed at t={t!r}")
    return float(summary.theta_ra[0])


# ---------------------------------------------------------------------------
# Curves on the observed treatment grid
# ---------------------------------------------------------------------------


def _unique_grid(data: Dataset) -> np.ndarray:
    return np.unique(data.t)


def _trim_mask(grid: np.ndarray, data: Dataset, params: EstimParams) -> np.ndarray:
    if params.trim_lo == 0.0 and params.trim_hi == 1.0:
        return np.ones(grid.shape[0], dtype=bool)
    lo, hi = np.quantile(data.t, [params.trim_lo, params.trim_hi])
    return (grid >= lo) & (grid <= hi)


def _full_summary(data: Dataset, params: EstimParams, path: str = "auto") -> GridFitSummary:
    """Fit summary on the de-duplicated order statistics of T."""
    return grid_fit_summary(data, _unique_grid(data), params, path=path)


def _curve_from_summary(
    summary: GridFitSummary,
    which: str,
    data: Dataset,
    params: EstimParams,
) -> CurveEstimate:
    values = {"theta_C": summary.theta_c, "theta_RA": summary.theta_ra, "m_RA": summary.m_ra}[
        which
    ]
    skipped = summary.theta_skipped if which == "theta_C" else summary.all_failed
    keep = _trim_mask(summary.grid, data, params)
    if bool(skipped[keep].all()):
        raise AllFitsFailed(f"no usable grid point for {which}")
    return CurveEstimate(
        grid=summary.grid[keep],
        values=values[keep],
        estimator_tag=which,
        params_used=params,
        skipped=skipped[keep],
        diagnostics={
            "dropped_fits": int(summary.dropped[keep].sum()),
            "skipped_points": int(skipped[keep].sum()),
        },
    )


def theta_C_curve(data: Dataset, params: EstimParams, path: str = "auto") -> CurveEstimate:
    """theta_C evaluated at the order statistics of T, trimmed for reporting."""
    if data.n < 2:
        raise ValueError("curve estimation needs at least two observations")
    return _curve_from_summary(_full_summary(data, params, path), "theta_C", data, params)


def theta_RA_curve(data: Dataset, params: EstimParams, path: str = "auto") -> CurveEstimate:
    """theta_RA evaluated at the order statistics of T, trimmed for reporting."""
    return _curve_from_summary(_full_summary(data, params, path), "theta_RA", data, params)


def m_RA_curve(data: Dataset, params: EstimParams, path: str = "auto") -> CurveEstimate:
    """m_RA evaluated at the order statistics of T, trimmed for reporting."""
    return _curve_from_summary(_full_summary(data, params, path), "m_RA", data, params)


# ---------------------------------------------------------------------------
# Integral estimator
# ---------------------------------------------------------------------------


def _interp_over_skips(grid: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, int]:
    """Fill NaN entries by linear interpolation across retained neighbors.

    The Riemann sum needs an integrand value at every order statistic;
    isolated skipped points are bridged rather than poisoning every
    integral that crosses them. End gaps take the nearest retained value.
    """
    bad = ~np.isfinite(values)
    if not bad.any():
        return values, 0
    if bad.all():
        raise AllFitsFailed("the derivative curve has no retained grid point")
    filled = values.copy()
    filled[bad] = np.interp(grid[bad], grid[~bad], values[~bad])
    return filled, int(bad.sum())


def m_theta_fast(data: Dataset, theta: CurveEstimate) -> CurveEstimate:
    """O(n) Riemann-sum evaluation of the integral estimator at the order statistics.

    ``theta`` must hold the derivative estimates on the full (untrimmed)
    de-duplicated order statistics of ``data``'s treatments. For each order
    statistic T_(j),

        m(T_(j)) = mean(Y) + (1/n) * sum_i Delta_i * [ i * theta(T_(i)) * 1{i<j}
                                                      - (n-i) * theta(T_(i+1)) * 1{i>=j} ],

    computed with prefix/suffix sums. Duplicate treatments contribute
    zero-width terms and share one derivative evaluation.
    """
    grid = _unique_grid(data)
    if theta.grid.shape != grid.shape or not np.array_equal(theta.grid, grid):
        raise ValueError("theta must be evaluated on the full order-statistic grid of data")
    theta_vals, n_filled = _interp_over_skips(theta.grid, theta.values)

    t_sorted = np.sort(data.t)
    n = t_sorted.shape[0]
    theta_os = theta_vals[np.searchsorted(grid, t_sorted)]
    y_bar = float(data.y.mean())
    if n == 1:
        values = np.array([y_bar])
    else:
        delta = np.diff(t_sorted)
        idx = np.arange(1, n, dtype=np.float64)
        fwd = idx * theta_os[:-1] * delta  # i * theta(T_(i)) * Delta_i
        bwd = (n - idx) * theta_os[1:] * delta  # (n-i) * theta(T_(i+1)) * Delta_i
        prefix = np.concatenate(([0.0], np.cumsum(fwd)))  # sum_{i<j}
        suffix = np.concatenate((np.cumsum(bwd[::-1])[::-1], [0.0]))  # sum_{i>=j}
        values = y_bar + (prefix - suffix) / n
        values = values[np.searchsorted(t_sorted, grid)]
    diagnostics = dict(theta.diagnostics)
    diagnostics["interpolated_theta_points"] = n_filled
    return CurveEstimate(
        grid=grid,
        values=values,
        estimator_tag="m_theta",
        params_used=theta.params_used,
        skipped=np.zeros(grid.shape[0], dtype=bool),
        diagnostics=diagnostics,
    )


def m_theta_curve(data: Dataset, params: EstimParams, path: str = "auto") -> CurveEstimate:
    """Integral estimator on the order statistics, trimmed for reporting.

    The Riemann sum always runs over the full sample; trimming only
    restricts which grid points are reported.
    """
    full = grid_fit_summary(data, _unique_grid(data), params, path=path)
    theta = CurveEstimate(
        grid=full.grid,
        values=full.theta_c,
        estimator_tag="theta_C",
        params_used=params,
        skipped=full.theta_skipped,
        diagnostics={"dropped_fits": int(full.dropped.sum())},
    )
    curve = m_theta_fast(data, theta)
    keep = _trim_mask(curve.grid, data, params)
    return CurveEstimate(
        grid=curve.grid[keep],
        values=curve.values[keep],
        estimator_tag="m_theta",
        params_used=params,
        skipped=curve.skipped[keep],
        diagnostics=curve.diagnostics,
    )


def estimate_all(data: Dataset, params: EstimParams, path: str = "auto") -> dict:
    """All four curve estimators from a single batched-fit pass.

    Returns a dict keyed by estimator tag. Cheaper than calling the four
    curve functions separately, which would redo the local fits.
    """
    full = grid_fit_summary(data, _unique_grid(data), params, path=path)
    out = {}
    for which in ("theta_C", "theta_RA", "m_RA"):
        out[which] = _curve_from_summary(full, which, data, params)
    theta_full = CurveEstimate(
        grid=full.grid,
        values=full.theta_c,
        estimator_tag="theta_C",
        params_used=params,
        skipped=full.theta_skipped,
        diagnostics={"dropped_fits": int(full.dropped.sum())},
    )
    m_curve = m_theta_fast(data, theta_full)
    keep = _trim_mask(m_curve.grid, data, params)
    out["m_theta"] = CurveEstimate(
        grid=m_curve.grid[keep],
        values=m_curve.values[keep],
        estimator_tag="m_theta",
        params_used=params,
        skipped=m_curve.skipped[keep],
        diagnostics=m_curve.diagnostics,
    )
    return out


def m_theta_interpolate(curve: CurveEstimate, t) -> float | np.ndarray:
    """Piecewise-linear curve evaluation with end-value clamping outside the grid."""
    keep = ~curve.skipped
    if not keep.any():
        raise ValueError("curve has no retained grid points")
    out = np.interp(t, curve.grid[keep], curve.values[keep])
    if np.ndim(t) == 0:
        return float(out)
    return out


def m_theta_quadrature_oracle(
    data: Dataset, params: EstimParams, n_grid: int, path: str = "auto"
) -> CurveEstimate:
    """Reference integral estimator via dense trapezoidal quadrature.

    Evaluates theta_C on an ``n_grid``-point uniform grid spanning the
    sample and integrates it exactly (as a piecewise-linear function), so it
    bounds the Riemann approximation error of `m_theta_fast`. Too slow for
    routine use; kept as an oracle for tests.
    """
    if n_grid < 2 * data.n:
        raise ValueError("oracle needs n_grid >= 2n for a meaningfully dense grid")
    t_lo, t_hi = float(data.t.min()), float(data.t.max())
    if t_hi <= t_lo:
        raise ValueError("degenerate treatment range")
    dense = np.linspace(t_lo, t_hi, n_grid)
    summary = grid_fit_summary(data, dense, params, path=path)
    theta_vals, _ = _interp_over_skips(dense, summary.theta_c)
    # integrate the piecewise-linear interpolant of theta exactly: trapezoid
    # sums at the nodes plus the exact partial segment at the endpoint
    steps = np.diff(dense)
    slopes = np.diff(theta_vals) / steps
    cumint = np.concatenate(([0.0], np.cumsum(0.5 * (theta_vals[1:] + theta_vals[:-1]) * steps)))

    def int_at(x):
        k = np.clip(np.searchsorted(dense, x, side="right") - 1, 0, n_grid - 2)
        dt = np.asarray(x) - dense[k]
        return cumint[k] + theta_vals[k] * dt + 0.5 * slopes[k] * dt * dt

    anchor = float(data.y.mean()) - float(np.mean(int_at(data.t)))
    grid = _unique_grid(data)
    keep = _trim_mask(grid, data, params)
    return CurveEstimate(
        grid=grid[keep],
        values=(anchor + int_at(grid))[keep],
        estimator_tag="m_theta",
        params_used=params,
        skipped=np.zeros(int(keep.sum()), dtype=bool),
        diagnostics={"method": "quadrature_oracle", "n_grid": int(n_grid)},
    )
