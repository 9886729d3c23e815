"""Partial local polynomial regression.

Fits, at an evaluation point ``(t, s)``, a polynomial of order ``q`` in the
treatment offset ``T_i - t`` together with a linear term in the covariate
offsets ``S_i - s``, by weighted least squares with product kernel weights.
The intercept estimates the conditional mean ``mu(t, s)`` and the linear
treatment coefficient estimates its partial derivative in ``t``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoLocalData
from .kernels import KernelKind, eval_kernel

__all__ = [
    "Dataset",
    "EstimParams",
    "LocalFit",
    "build_design_row",
    "local_fit",
    "mu_hat",
    "beta2_hat",
]


@dataclass(frozen=True)
class Dataset:
    """Immutable observed triplets (Y, T, S).

    Attributes:
        y: Outcomes, shape (n,).
        t: Continuous treatment values, shape (n,).
        s: Covariates, shape (n, d); d = 0 means no covariates.
    """

    y: np.ndarray
    t: np.ndarray
    s: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        if y.ndim != 1 or t.ndim != 1:
            raise ValueError("y and t must be one-dimensional")
        if self.s is None:
            s = np.empty((y.shape[0], 0), dtype=np.float64)
        else:
            s = np.ascontiguousarray(self.s, dtype=np.float64)
            if s.ndim == 1:
                s = s.reshape(-1, 1)
            if s.ndim != 2:
                raise ValueError("s must have shape (n, d)")
        n = y.shape[0]
        if n < 1:
            raise ValueError("dataset needs at least one observation")
        if t.shape[0] != n or s.shape[0] != n:
            raise ValueError("y, t, s must share the same number of rows")
        if not (np.isfinite(y).all() and np.isfinite(t).all() and np.isfinite(s).all()):
            raise ValueError("dataset entries must all be finite")
        for arr in (y, t, s):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.s.shape[1]


@dataclass(frozen=True)
class EstimParams:
    """Smoothing configuration shared by all estimators.

    ``h`` is the treatment bandwidth of the local polynomial stage, ``b``
    the per-coordinate covariate bandwidths, and ``hbar`` the bandwidth of
    the conditional-CDF weights. ``trim_lo``/``trim_hi`` are quantile
    fractions of T delimiting the region where curves are reported.
    """

    h: float
    b: tuple = ()
    hbar: float = 1.0
    q: int = 2
    kernel_t: KernelKind = KernelKind.EPANECHNIKOV
    kernel_s: KernelKind = KernelKind.EPANECHNIKOV
    kernel_cdf: KernelKind = KernelKind.GAUSSIAN
    trim_lo: float = 0.0
    trim_hi: float = 1.0
    ridge_tol: float = 1e-10

    def __post_init__(self):
        b = tuple(float(v) for v in np.atleast_1d(np.asarray(self.b, dtype=np.float64)))
        object.__setattr__(self, "b", b)
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if any(not v > 0 for v in b):
            raise ValueError("every covariate bandwidth must be > 0")
        if not self.hbar > 0:
            raise ValueError("hbar must be > 0")
        if self.q < 1:
            raise ValueError("polynomial order q must be >= 1")
        if not 0.0 <= self.trim_lo < self.trim_hi <= 1.0:
            raise ValueError("trim quantiles need 0 <= trim_lo < trim_hi <= 1")
        if not self.ridge_tol > 0:
            raise ValueError("ridge_tol must be > 0")

    def b_array(self) -> np.ndarray:
        return np.asarray(self.b, dtype=np.float64)


@dataclass(frozen=True)
class LocalFit:
    """Solved coefficients of one local weighted least-squares problem.

    ``beta`` holds the q+1 treatment-polynomial coefficients and ``alpha``
    the d covariate slopes. ``rank_deficient`` marks a numerically singular
    design, in which case the minimum-norm solution is returned.
    """

    beta: np.ndarray
    alpha: np.ndarray
    eff_points: int
    rank_deficient: bool = False


def build_design_row(t: float, s, T_i: float, S_i, q: int) -> np.ndarray:
    """Design row (1, (T_i-t), ..., (T_i-t)^q, S_i1-s_1, ..., S_id-s_d)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    S_i = np.atleast_1d(np.asarray(S_i, dtype=np.float64))
    dt = float(T_i) - float(t)
    row = np.empty(q + 1 + s.size)
    row[: q + 1] = dt ** np.arange(q + 1)
    row[q + 1 :] = S_i - s
    return row


def _local_weights(data: Dataset, t: float, s: np.ndarray, params: EstimParams) -> np.ndarray:
    w = eval_kernel(params.kernel_t, (data.t - t) / params.h)
    b = params.b_array()
    for j in range(data.d):
        w = w * eval_kernel(params.kernel_s, (data.s[:, j] - s[j]) / b[j])
    return w


def local_fit(data: Dataset, t: float, s, params: EstimParams) -> LocalFit:
    """Solve the kernel-weighted least-squares problem centered at (t, s).

    The system is solved through an SVD of the square-root-weighted design,
    so a rank-deficient design yields the minimum-norm coefficient vector
    (flagged via ``rank_deficient``) instead of failing.

    Raises:
        NoLocalData: when no observation has strictly positive weight.
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    if s.size != data.d:
        raise ValueError(f"s has {s.size} coordinates, dataset has d={data.d}")
    w = _local_weights(data, t, s, params)
    active = w > 0
    if not active.any():
        raise NoLocalData(f"no observation receives positive weight at t={t!r}")
    sw = np.sqrt(w[active])
    q = params.q
    ncols = q + 1 + data.d
    X = np.empty((int(active.sum()), ncols))
    dt = data.t[active] - t
    X[:, 0] = 1.0
    for p in range(1, q + 1):
        X[:, p] = X[:, p - 1] * dt
    if data.d:
        X[:, q + 1 :] = data.s[active] - s
    coef, _, rank, _ = np.linalg.lstsq(X * sw[:, None], data.y[active] * sw, rcond=params.ridge_tol)
    return LocalFit(
        beta=coef[: q + 1],
        alpha=coef[q + 1 :],
        eff_points=int(active.sum()),
        rank_deficient=rank < ncols,
    )


def mu_hat(fit: LocalFit) -> float:
    """Local estimate of the conditional mean: the fitted intercept."""
    return float(fit.beta[0])


def beta2_hat(fit: LocalFit) -> float:
    """Local estimate of the treatment partial derivative: the linear coefficient."""
    return float(fit.beta[1])
