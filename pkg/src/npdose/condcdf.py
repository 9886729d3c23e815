"""Nadaraya-Watson treatment weights and the conditional CDF estimator.

The covariate distribution given a treatment level is estimated by
kernel-weighting the empirical indicators ``1{S_i <= s}``, with weights
driven by how close each observation's treatment is to the target level.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights
from .kernels import KernelKind, eval_kernel
from .locpoly import Dataset

__all__ = ["NWWeights", "nw_weights", "cond_cdf", "UNDERFLOW_GUARD"]

# Below this raw kernel mass the normalized weights are numerically meaningless.
UNDERFLOW_GUARD = 1e-300


@dataclass(frozen=True)
class NWWeights:
    """Normalized kernel weights over the sample, plus their raw total."""

    w: np.ndarray
    total_raw: float


def nw_weights(tvec, t: float, hbar: float, kind: KernelKind = KernelKind.GAUSSIAN) -> NWWeights:
    """Kernel weights proportional to ``K((T_i - t) / hbar)``, summing to one.

    Raises:
        DegenerateWeights: all raw kernel values underflowed (or a compact
            kernel saw no points at all).
    """
    if not hbar > 0:
        raise ValueError("hbar must be > 0")
    tvec = np.asarray(tvec, dtype=np.float64)
    raw = eval_kernel(kind, (tvec - t) / hbar)
    total = float(np.sum(raw))
    if total < UNDERFLOW_GUARD:
        raise DegenerateWeights(f"all conditional-CDF kernel weights vanish at t={t!r}")
    return NWWeights(w=raw / total, total_raw=total)


def cond_cdf(
    data: Dataset, s, t: float, hbar: float, kind: KernelKind = KernelKind.GAUSSIAN
) -> float:
    """Estimated P(S <= s | T = t), with a coordinatewise closed indicator."""
    weights = nw_weights(data.t, t, hbar, kind)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    if s.size != data.d:
        raise ValueError(f"s has {s.size} coordinates, dataset has d={data.d}")
    ind = np.all(data.s <= s, axis=1)
    return float(weights.w @ ind)
