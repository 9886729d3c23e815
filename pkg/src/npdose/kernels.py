"""Kernel functions, exact kernel moments, and product kernels.

The local polynomial stage uses a compact kernel for the treatment and
covariates; the conditional-CDF stage defaults to a Gaussian kernel so its
weights never vanish. Moments are stored as closed forms rather than
quadrature so bandwidth formulas are bit-reproducible.
"""

import enum
import math

import numpy as np

__all__ = [
    "KernelKind",
    "eval_kernel",
    "kernel_moment",
    "kernel_sq_moment",
    "product_kernel_weight",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_2SQRT_PI = 0.5 / math.sqrt(math.pi)


class KernelKind(enum.Enum):
    """Supported kernel families.

    Epanechnikov has compact support [-1, 1]; Gaussian has unbounded
    support. Both integrate to one and are symmetric.
    """

    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"

    @classmethod
    def from_name(cls, name: str) -> "KernelKind":
        """Resolve a lowercase config/CLI name like ``"epanechnikov"``."""
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown kernel {name!r}; expected one of: {valid}") from None


def eval_kernel(kind: KernelKind, u):
    """Evaluate the kernel at ``u`` (scalar or array).

    Returns 0 outside the support for compact kernels.
    """
    u = np.asarray(u, dtype=np.float64)
    if kind is KernelKind.EPANECHNIKOV:
        out = 0.75 * (1.0 - u * u)
        out = np.where(np.abs(u) <= 1.0, out, 0.0)
    elif kind is KernelKind.GAUSSIAN:
        out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unsupported kernel kind: {kind}")
    if out.ndim == 0:
        return float(out)
    return out


# j-th raw moments int u^j K(u) du and squared-kernel moments int u^j K^2(u) du,
# j = 0..4. Odd moments vanish by symmetry.
_MOMENTS = {
    KernelKind.EPANECHNIKOV: (1.0, 0.0, 0.2, 0.0, 3.0 / 35.0),
    KernelKind.GAUSSIAN: (1.0, 0.0, 1.0, 0.0, 3.0),
}
_SQ_MOMENTS = {
    KernelKind.EPANECHNIKOV: (0.6, 0.0, 3.0 / 35.0, 0.0, 1.0 / 35.0),
    KernelKind.GAUSSIAN: (
        _INV_2SQRT_PI,
        0.0,
        0.5 * _INV_2SQRT_PI,
        0.0,
        0.75 * _INV_2SQRT_PI,
    ),
}


def kernel_moment(kind: KernelKind, j: int) -> float:
    """Closed-form moment ``int u^j K(u) du`` for ``j`` in 0..4."""
    if not 0 <= j <= 4:
        raise ValueError(f"kernel moments implemented for j in 0..4, got {j}")
    return _MOMENTS[kind][j]


def kernel_sq_moment(kind: KernelKind, j: int) -> float:
    """Closed-form moment ``int u^j K(u)^2 du`` for ``j`` in 0..4."""
    if not 0 <= j <= 4:
        raise ValueError(f"squared kernel moments implemented for j in 0..4, got {j}")
    return _SQ_MOMENTS[kind][j]


def product_kernel_weight(kind: KernelKind, u) -> float:
    """Product kernel ``prod_i K(u_i)`` over the coordinates of ``u``.

    With a single coordinate this equals ``eval_kernel``; an empty ``u``
    gives the empty product 1.
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u.size == 0:
        return 1.0
    return float(np.prod(eval_kernel(kind, u)))
