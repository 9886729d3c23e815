"""Empirical bootstrap confidence intervals and uniform bands.

Resamples observation triplets with replacement, recomputes the requested
curve on every replicate (bandwidths held fixed at the original-sample
values), and turns the absolute deviations from the base curve into
pointwise and sup-norm quantiles. Replicate RNG streams are derived from
(seed, replicate index), so results are independent of worker count and
scheduling order.
"""

import dataclasses
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AllFitsFailed, BootstrapFailure, DegenerateWeights, NoLocalData
from .estimators import CurveEstimate, m_theta_curve, m_theta_interpolate, theta_C_curve
from .locpoly import Dataset, EstimParams

__all__ = ["BootstrapResult", "resample", "bootstrap_curves", "confidence_band"]

_BOOT_ESTIMATORS = {"m_theta": m_theta_curve, "theta_C": theta_C_curve}
# Above this share of failed replicates the band quantiles are not trustworthy.
_MAX_FAILURE_SHARE = 0.10


@dataclass(frozen=True)
class BootstrapResult:
    """Base curve, replicate curves on the base grid, and band halfwidths."""

    base: CurveEstimate
    replicates: np.ndarray
    alpha: float
    pointwise_halfwidth: np.ndarray
    uniform_halfwidth: float
    B: int
    seed: int
    n_failed: int = 0


def resample(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Draw n observation triplets i.i.d. with replacement."""
    idx = rng.integers(0, data.n, size=data.n)
    return Dataset(y=data.y[idx], t=data.t[idx], s=data.s[idx])


def _replicate_rng(seed: int, b: int) -> np.random.Generator:
    # Stream depends only on (seed, b): order- and parallelism-independent.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(b,)))


def _curve_values_on(curve: CurveEstimate, grid: np.ndarray) -> np.ndarray:
    return np.asarray(m_theta_interpolate(curve, grid), dtype=np.float64)


def _replicate_batch(data, params, which, seed, b_indices, base_grid):
    estimator = _BOOT_ESTIMATORS[which]
    values = np.full((len(b_indices), base_grid.shape[0]), np.nan)
    failed = []
    for k, b in enumerate(b_indices):
        boot = resample(data, _replicate_rng(seed, b))
        try:
            curve = estimator(boot, params)
        except (AllFitsFailed, DegenerateWeights, NoLocalData):
            failed.append(b)
            continue
        values[k] = _curve_values_on(curve, base_grid)
    return values, failed


def _limit_worker_threads():
    # workers already partition the machine; nested thread pools only thrash
    import warnings

    warnings.filterwarnings("ignore", message="The TBB threading layer")
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except Exception:
        pass
    try:
        import numba

        numba.set_num_threads(1)
    except Exception:
        pass


def _pool_context():
    try:
        ctx = multiprocessing.get_context("forkserver")
        ctx.set_forkserver_preload(["npdose.bootstrap"])
        return ctx
    except ValueError:  # pragma: no cover - non-posix fallback
        return multiprocessing.get_context("spawn")


def _quantile_type1(sorted_vals: np.ndarray, level: float, axis: int = 0) -> np.ndarray:
    """Empirical quantile at index ceil(level * B) of the sorted sample."""
    count = sorted_vals.shape[axis]
    k = min(max(math.ceil(level * count), 1), count)
    return np.take(sorted_vals, k - 1, axis=axis)


def bootstrap_curves(
    data: Dataset,
    params: EstimParams,
    which: str = "m_theta",
    B: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    jobs: int | None = None,
) -> BootstrapResult:
    """Bootstrap the requested curve estimator ("m_theta" or "theta_C").

    The base curve lives on the (trimmed) order statistics of the original
    sample; every replicate curve is computed on its resample's own order
    statistics, untrimmed, and mapped onto the base grid by end-clamped
    linear interpolation. Replicates whose estimation fails outright are
    recorded and excluded; more than 10% failures aborts.

    Deterministic for fixed (data, params, which, B, seed), whatever
    ``jobs`` is. With ``jobs > 1`` worker processes are started through the
    standard spawn/forkserver machinery, so scripts (not the CLI) must keep
    the usual ``if __name__ == "__main__"`` guard around their entry point.
    """
    if which not in _BOOT_ESTIMATORS:
        raise ValueError(f"which must be one of {sorted(_BOOT_ESTIMATORS)}, got {which!r}")
    if B < 1:
        raise ValueError("B must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")

    base = _BOOT_ESTIMATORS[which](data, params)
    base_grid = base.grid
    untrimmed = dataclasses.replace(params, trim_lo=0.0, trim_hi=1.0)

    if jobs is None:
        jobs = os.cpu_count() or 1
    jobs = max(1, min(int(jobs), B))
    all_b = list(range(B))
    if jobs == 1:
        batches = [_replicate_batch(data, untrimmed, which, seed, all_b, base_grid)]
    else:
        # forkserver, not fork: the JIT kernels use an OpenMP thread pool
        # that is not fork-safe once warmed up in the parent. The server
        # preloads this module so workers fork with warm imports.
        splits = [list(chunk) for chunk in np.array_split(all_b, jobs * 4) if chunk.size]
        ctx = _pool_context()
        with ProcessPoolExecutor(
            max_workers=jobs, mp_context=ctx, initializer=_limit_worker_threads
        ) as pool:
            futures = [
                pool.submit(_replicate_batch, data, untrimmed, which, seed, chunk, base_grid)
                for chunk in splits
            ]
            batches = [f.result() for f in futures]

    values = np.concatenate([v for v, _ in batches], axis=0)
    ok = np.isfinite(values).all(axis=1)
    replicates = values[ok]
    n_failed = int(B - replicates.shape[0])
    if n_failed > _MAX_FAILURE_SHARE * B:
        failed = sorted(b for _, fs in batches for b in fs)
        raise BootstrapFailure(f"{n_failed}/{B} bootstrap replicates failed (e.g. {failed[:5]})")
    if replicates.shape[0] == 0:
        raise BootstrapFailure("no successful bootstrap replicate")

    retained = ~base.skipped
    dev = np.abs(replicates - base.values[None, :])
    level = 1.0 - alpha
    pointwise = np.full(base_grid.shape[0], np.nan)
    pointwise[retained] = _quantile_type1(np.sort(dev[:, retained], axis=0), level, axis=0)
    sup_dev = dev[:, retained].max(axis=1)
    uniform = float(_quantile_type1(np.sort(sup_dev), level))
    return BootstrapResult(
        base=base,
        replicates=replicates,
        alpha=alpha,
        pointwise_halfwidth=pointwise,
        uniform_halfwidth=uniform,
        B=B,
        seed=seed,
        n_failed=n_failed,
    )


def confidence_band(result: BootstrapResult, mode: str = "pointwise"):
    """Lower/upper band arrays on the base grid: base value +/- halfwidth."""
    if mode == "pointwise":
        half = result.pointwise_halfwidth
    elif mode == "uniform":
        half = np.where(result.base.skipped, np.nan, result.uniform_halfwidth)
    else:
        raise ValueError("mode must be 'pointwise' or 'uniform'")
    return result.base.values - half, result.base.values + half
