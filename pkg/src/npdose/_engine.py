"""Vectorized evaluation of local polynomial fits over treatment grids.

Curve estimators need, at every grid point t, a separate local fit centered
at (t, S_i) for each observation i. Solving those n systems one by one per
grid point is prohibitively slow, so this module assembles all of them from
a shared set of kernel-weighted moments.

For the fit centered at (t, S_i) with the column-scaled basis
``x_k = (1, u_k, ..., u_k^q, (S_k1-S_i1)/b_1, ..., (S_kd-S_id)/b_d)``,
``u_k = (T_k - t)/h``, every entry of the normal equations X'WX and X'Wy is
a linear combination of moments

    M_f(t, i) = sum_k w_k(t, i) * f_k,    w_k = K_T(u_k) * c_ki,

where ``c_ki = prod_j K_S((S_kj - S_ij)/b_j)`` does not depend on t and the
features f run over u^r (r <= 2q), u^p S_j (p <= q), S_j S_l, u^p Y, and
S_j Y. Two evaluation paths produce the moment tensor:

* windowed: per grid point, one matrix product F' C restricted to the rows
  where K_T > 0. Exact for any kernel; cost grows with the window size, so
  it is the right path for narrow windows or a Gaussian K_T.
* prefix: with an Epanechnikov K_T, K_T(u) * u^r is a polynomial in T_k on
  the window |T_k - t| < h, so each moment is a gap of column prefix sums
  of T^rho-weighted copies of C. This makes a whole n-point grid cost
  O(n^2) instead of O(n^3). Prefix gaps subtract accumulated sums, which
  loses ~(range/h)^(2q+2) digits; the path is only selected when that
  amplification is provably harmless.

The per-fit normal equations are solved by an unrolled Cholesky that is
vectorized across fits; fits whose window is smaller than the column count,
or whose pivots collapse below what normal equations can resolve, are
re-solved one by one with the same SVD least-squares construction as the
reference solver in `locpoly`, on their actual weighted window rows. Tests
pin the agreement of all paths against that reference.
"""

import math
from dataclasses import dataclass

import numpy as np

from .condcdf import UNDERFLOW_GUARD
from .kernels import KernelKind, eval_kernel
from .locpoly import Dataset, EstimParams

try:
    from . import _kernels_nb

    _NB = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _kernels_nb = None
    _NB = False

__all__ = ["GridFitSummary", "grid_fit_summary"]

_EPS = np.finfo(np.float64).eps
# Largest tolerated cancellation error (relative) in the prefix path.
_PREFIX_AMP_LIMIT = 1e-9
# Cap on the per-chunk moment tensor, in bytes.
_MOMENT_BUDGET = 512 * 1024 * 1024
# Relative Cholesky pivot floor: below it a system's conditioning exceeds
# what normal equations resolve reliably, so it is re-solved exactly.
_CHOL_PIV_REL = 1e-8


@dataclass(frozen=True)
class GridFitSummary:
    """Per-grid-point reductions of the batched local fits.

    ``theta_c`` is the conditional-CDF-weighted average of the local
    derivative estimates, ``theta_ra``/``m_ra`` the plain averages of the
    derivative and mean estimates. Entries are NaN where the point is
    unusable; ``dropped`` counts observations excluded because their local
    fit had zero total weight.
    """

    grid: np.ndarray
    theta_c: np.ndarray
    theta_ra: np.ndarray
    m_ra: np.ndarray
    dropped: np.ndarray
    all_failed: np.ndarray
    nw_degenerate: np.ndarray

    @property
    def theta_skipped(self) -> np.ndarray:
        return self.all_failed | self.nw_degenerate


class _Layout:
    """Feature bookkeeping: each weighting base owns a contiguous block."""

    def __init__(self, q: int, d: int):
        self.q = q
        self.d = d
        self.off_us = 2 * q + 1
        self.off_ss = self.off_us + (q + 1) * d
        self.pairs = [(j, l) for j in range(d) for l in range(j, d)]
        self._pair_pos = {pair: k for k, pair in enumerate(self.pairs)}
        self.off_uy = self.off_ss + len(self.pairs)
        self.off_sy = self.off_uy + (q + 1)
        self.m = self.off_sy + d

    def u(self, r: int) -> int:
        return r

    def us(self, p: int, j: int) -> int:
        return self.off_us + j * (self.q + 1) + p

    def ss(self, j: int, l: int) -> int:
        if j > l:
            j, l = l, j
        return self.off_ss + self._pair_pos[(j, l)]

    def uy(self, p: int) -> int:
        return self.off_uy + p

    def sy(self, j: int) -> int:
        return self.off_sy + j

    def bases(self, ss: np.ndarray, ys: np.ndarray):
        """(base vector or None, first feature index, u-powers of the block)."""
        q, d = self.q, self.d
        out = [(None, 0, list(range(2 * q + 1)))]
        for j in range(d):
            out.append((ss[:, j], self.us(0, j), list(range(q + 1))))
        for j, l in self.pairs:
            out.append((ss[:, j] * ss[:, l], self.ss(j, l), [0]))
        out.append((ys, self.uy(0), list(range(q + 1))))
        for j in range(d):
            out.append((ss[:, j] * ys, self.sy(j), [0]))
        return out


def _sorted_arrays(data: Dataset):
    order = np.argsort(data.t, kind="stable")
    return data.t[order], data.y[order], data.s[order]


def _cov_weight_matrix(ss: np.ndarray, b: np.ndarray, kernel_s: KernelKind) -> np.ndarray:
    """C[k, i] = prod_j K_S((S_kj - S_ij) / b_j); a single column of ones for d = 0."""
    n, d = ss.shape
    if d == 0:
        return np.ones((n, 1))
    C = np.ones((n, n))
    for j in range(d):
        col = ss[:, j]
        C *= eval_kernel(kernel_s, (col[:, None] - col[None, :]) / b[j])
    return C


def _windows(ts: np.ndarray, grid: np.ndarray, params: EstimParams):
    """Index ranges of the strictly positive K_T window per grid point."""
    if params.kernel_t is KernelKind.EPANECHNIKOV:
        lo = np.searchsorted(ts, grid - params.h, side="right")
        hi = np.searchsorted(ts, grid + params.h, side="left")
    else:
        lo = np.zeros(grid.shape[0], dtype=np.intp)
        hi = np.full(grid.shape[0], ts.shape[0], dtype=np.intp)
    return lo.astype(np.intp), hi.astype(np.intp)


def _use_prefix_path(ts: np.ndarray, params: EstimParams, path: str) -> bool:
    if path == "windowed":
        return False
    if params.kernel_t is not KernelKind.EPANECHNIKOV:
        if path == "prefix":
            raise ValueError("prefix path requires an Epanechnikov treatment kernel")
        return False
    if path == "prefix":
        return True
    span = ts[-1] - ts[0]
    if span <= 0 or ts.shape[0] < 64:
        return False
    amp = max(span / params.h, 1.0) ** (2 * params.q + 2) * ts.shape[0] * _EPS
    return amp <= _PREFIX_AMP_LIMIT


def _windowed_moments(chunk, lo, hi, ts, ys, ss, C, params, lay, out):
    """out[g] = F' C over the window rows; out has shape (c, m, nf)."""
    q, d = lay.q, lay.d
    for gi in range(chunk.shape[0]):
        a0, a1 = lo[gi], hi[gi]
        if a1 <= a0:
            continue  # all-zero moments mark the point invalid
        u = (ts[a0:a1] - chunk[gi]) / params.h
        aup = np.empty((2 * q + 1, a1 - a0))
        aup[0] = eval_kernel(params.kernel_t, u)
        for r in range(1, 2 * q + 1):
            aup[r] = aup[r - 1] * u
        F = np.empty((lay.m, a1 - a0))
        F[: 2 * q + 1] = aup
        srows = ss[a0:a1]
        yrows = ys[a0:a1]
        for j in range(d):
            for p in range(q + 1):
                F[lay.us(p, j)] = aup[p] * srows[:, j]
        for j, l in lay.pairs:
            F[lay.ss(j, l)] = aup[0] * srows[:, j] * srows[:, l]
        for p in range(q + 1):
            F[lay.uy(p)] = aup[p] * yrows
        for j in range(d):
            F[lay.sy(j)] = aup[0] * srows[:, j] * yrows
        np.matmul(F, C[a0:a1], out=out[gi])


def _prefix_moments(chunk_c, lo, hi, tc, tpow, ys, ss, C, params, lay, out, use_nb):
    """Moment tensor via window sums of T-power-weighted columns of C.

    On the window, 0.75 (u^r - u^(r+2)) with u = (T - t)/h expands into
    powers T^rho with grid-dependent coefficients, so each feature block is
    a small batched matmul of those coefficients against the window sums.
    The sums come either from prefix-sum gaps (numpy) or an equivalent
    two-pointer sweep (numba); both accumulate over the whole sample, which
    is what the path's amplification guard accounts for.
    """
    q = lay.q
    h = params.h
    n, nf = C.shape
    c = chunk_c.shape[0]
    neg_t_pow = np.empty((2 * q + 3, c))
    neg_t_pow[0] = 1.0
    for e in range(1, 2 * q + 3):
        neg_t_pow[e] = neg_t_pow[e - 1] * (-chunk_c)

    ones = np.ones(n)
    base_list = lay.bases(ss, ys)

    def feat_gamma(rlist):
        gamma = np.zeros((c, len(rlist), max(rlist) + 3))
        for fi, r in enumerate(rlist):
            for rho in range(r + 3):
                g = -math.comb(r + 2, rho) * h ** -(r + 2) * neg_t_pow[r + 2 - rho]
                if rho <= r:
                    g = g + math.comb(r, rho) * h**-r * neg_t_pow[r - rho]
                gamma[:, fi, rho] = 0.75 * g
        return gamma

    if use_nb:
        rho_max = 2 * q + 3
        bases_mat = np.column_stack([ones if v is None else v for v, _, _ in base_list])
        n_rho = np.array([max(rlist) + 3 for _, _, rlist in base_list], dtype=np.int64)
        base_of = np.empty(lay.m, dtype=np.int64)
        gamma_all = np.zeros((c, lay.m, rho_max))
        for bidx, (_, f0, rlist) in enumerate(base_list):
            base_of[f0 : f0 + len(rlist)] = bidx
            g = feat_gamma(rlist)
            gamma_all[:, f0 : f0 + len(rlist), : g.shape[2]] = g
        _kernels_nb.window_moments(C, bases_mat, tc, n_rho, base_of, gamma_all, lo, hi, out)
        return

    buf = np.empty((n, nf))
    cs = np.zeros((n + 1, nf))
    gaps_buf = np.empty((c, 2 * q + 3, nf))
    for base_vec, f0, rlist in lay.bases(ss, ys):
        n_rho = max(rlist) + 3
        gamma = feat_gamma(rlist)
        gaps = gaps_buf[:, :n_rho, :]
        for rho in range(n_rho):
            vec = tpow[rho] if base_vec is None else tpow[rho] * base_vec
            np.multiply(C, vec[:, None], out=buf)
            np.cumsum(buf, axis=0, out=cs[1:])
            np.subtract(cs[hi], cs[lo], out=gaps[:, rho, :])
        np.matmul(gamma, gaps, out=out[:, f0 : f0 + len(rlist), :])


def _assemble(M, Si, b, lay):
    """Normal-equation blocks (p, p, c, nf) and (p, c, nf) from the moments."""
    q, d = lay.q, lay.d
    p = q + 1 + d
    c, _, nf = M.shape
    Sb = Si.T[:, None, :]  # (d, 1, nf): broadcasts against (c, nf)
    G = np.empty((p, p, c, nf))
    rhs = np.empty((p, c, nf))
    for p1 in range(q + 1):
        for p2 in range(p1, q + 1):
            G[p1, p2] = M[:, lay.u(p1 + p2), :]
            if p2 != p1:
                G[p2, p1] = G[p1, p2]
    for j in range(d):
        for pp in range(q + 1):
            v = (M[:, lay.us(pp, j), :] - Sb[j] * M[:, lay.u(pp), :]) / b[j]
            G[pp, q + 1 + j] = v
            G[q + 1 + j, pp] = v
    for j in range(d):
        for l in range(j, d):
            v = (
                M[:, lay.ss(j, l), :]
                - Sb[j] * M[:, lay.us(0, l), :]
                - Sb[l] * M[:, lay.us(0, j), :]
                + Sb[j] * Sb[l] * M[:, lay.u(0), :]
            ) / (b[j] * b[l])
            G[q + 1 + j, q + 1 + l] = v
            if l != j:
                G[q + 1 + l, q + 1 + j] = v
    for pp in range(q + 1):
        rhs[pp] = M[:, lay.uy(pp), :]
    for j in range(d):
        rhs[q + 1 + j] = (M[:, lay.sy(j), :] - Sb[j] * M[:, lay.uy(0), :]) / b[j]
    return G, rhs


def _chol_solve(G, rhs):
    """Unrolled Cholesky solve, vectorized across the trailing axes.

    Returns (coef (p, ...), ok (...)); systems whose pivot ratio collapses
    are flagged in ``ok`` and must be re-solved by the caller. Flagged
    systems proceed with unit pivots so no NaN leaks across the batch. The
    conservative pivot floor keeps the trusted region where the
    normal-equation solve is accurate to ~1e-8.
    """
    p = G.shape[0]
    dmax = G[0, 0]
    for j in range(1, p):
        dmax = np.maximum(dmax, G[j, j])
    piv_floor = _CHOL_PIV_REL * dmax
    ok = np.ones(G.shape[2:], dtype=bool)
    L = [[None] * p for _ in range(p)]
    for j in range(p):
        s = G[j, j].copy()
        for k in range(j):
            s -= L[j][k] * L[j][k]
        good = s > piv_floor
        ok &= good
        L[j][j] = np.sqrt(np.where(good, s, 1.0))
        for i in range(j + 1, p):
            v = G[i, j].copy()
            for k in range(j):
                v -= L[i][k] * L[j][k]
            L[i][j] = v / L[j][j]
    z = [None] * p
    for i in range(p):
        v = rhs[i].copy()
        for k in range(i):
            v -= L[i][k] * z[k]
        z[i] = v / L[i][i]
    coef = [None] * p
    for i in range(p - 1, -1, -1):
        v = z[i]
        for k in range(i + 1, p):
            v = v - L[k][i] * coef[k]
        coef[i] = v / L[i][i]
    return np.stack(coef), ok


def _exact_refit(ts, ys, ss, si_fit, C, grid, lo, hi, params, rows_g, rows_i):
    """Re-solve flagged fits exactly like the reference per-point solver.

    Normal equations cannot resolve rank decisions below ~sqrt(eps) in the
    design's singular-value ratio, so every fit whose Cholesky pivots
    collapse (or whose window is smaller than the column count) is redone
    as an SVD least-squares problem on its actual weighted window rows.
    Returns natural-basis (intercept, linear treatment coefficient) pairs.
    """
    q, d = params.q, ss.shape[1]
    out = np.empty((rows_g.shape[0], 2))
    for k in range(rows_g.shape[0]):
        g, i = rows_g[k], rows_i[k]
        a0, a1 = lo[g], hi[g]
        if a1 <= a0:
            out[k] = np.nan
            continue
        dt = ts[a0:a1] - grid[g]
        w = eval_kernel(params.kernel_t, dt / params.h) * C[a0:a1, i]
        act = w > 0
        if not act.any():
            out[k] = np.nan
            continue
        dt = dt[act]
        X = np.empty((dt.shape[0], q + 1 + d))
        X[:, 0] = 1.0
        for p in range(1, q + 1):
            X[:, p] = X[:, p - 1] * dt
        if d:
            X[:, q + 1 :] = ss[a0:a1][act] - si_fit[i]
        sw = np.sqrt(w[act])
        coef, _, _, _ = np.linalg.lstsq(X * sw[:, None], ys[a0:a1][act] * sw, rcond=params.ridge_tol)
        out[k] = coef[:2]
    return out


def grid_fit_summary(
    data: Dataset, grid, params: EstimParams, path: str = "auto"
) -> GridFitSummary:
    """Evaluate every local fit needed at each grid point and reduce.

    Args:
        data: Observations.
        grid: Treatment evaluation points (need not match the sample).
        params: Smoothing configuration.
        path: "auto", "windowed", or "prefix" (testing hook).

    Returns:
        GridFitSummary with the localized derivative, the plain averages of
        the derivative and conditional-mean fits, and failure bookkeeping.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    n, d = data.n, data.d
    q = params.q
    p = q + 1 + d
    b = params.b_array()
    ts, ys, ss = _sorted_arrays(data)
    C = _cov_weight_matrix(ss, b, params.kernel_s)
    nf = C.shape[1]
    lay = _Layout(q, d)
    lo, hi = _windows(ts, grid, params)
    prefix = _use_prefix_path(ts, params, path)
    grid_sorted = bool(np.all(np.diff(grid) >= 0))
    use_nb_gaps = _NB and grid_sorted

    if prefix:
        t_mean = float(ts.mean())
        tc = ts - t_mean
        tpow = None
        if not use_nb_gaps:
            tpow = np.empty((2 * q + 3, n))
            tpow[0] = 1.0
            for e in range(1, 2 * q + 3):
                tpow[e] = tpow[e - 1] * tc
        cs_pos = np.zeros((n + 1, nf))
        np.cumsum(C > 0, axis=0, out=cs_pos[1:])
    si_fit = ss if nf == n else np.zeros((1, d))

    n_grid = grid.shape[0]
    theta_c = np.full(n_grid, np.nan)
    theta_ra = np.full(n_grid, np.nan)
    m_ra = np.full(n_grid, np.nan)
    dropped = np.zeros(n_grid, dtype=np.int64)
    all_failed = np.zeros(n_grid, dtype=bool)
    nw_deg = np.zeros(n_grid, dtype=bool)

    chunk_size = max(16, min(n_grid, _MOMENT_BUDGET // max(1, nf * lay.m * 8)))
    for c0 in range(0, n_grid, chunk_size):
        c1 = min(c0 + chunk_size, n_grid)
        chunk = grid[c0:c1]
        clo, chi = lo[c0:c1], hi[c0:c1]
        M = np.zeros((c1 - c0, lay.m, nf))
        if prefix:
            _prefix_moments(
                chunk - t_mean, clo, chi, tc, tpow, ys, ss, C, params, lay, M, use_nb_gaps
            )
            valid = (cs_pos[chi] - cs_pos[clo]) > 0
        else:
            _windowed_moments(chunk, clo, chi, ts, ys, ss, C, params, lay, M)
            valid = M[:, lay.u(0), :] > 0

        if _NB:
            mu = np.empty((c1 - c0, nf))
            coef1 = np.empty((c1 - c0, nf))
            chol_ok = np.empty((c1 - c0, nf), dtype=bool)
            _kernels_nb.assemble_solve(M, si_fit, b, q, d, mu, coef1, chol_ok)
        else:
            G, rhs = _assemble(M, si_fit, b, lay)
            coef, chol_ok = _chol_solve(G, rhs)
            mu, coef1 = coef[0], coef[1]
        # windows with fewer points than columns are rank-deficient by
        # construction; those and collapsed-pivot systems are re-solved with
        # the reference SVD path
        redo = valid & ~chol_ok
        small = (chi - clo) < p
        redo[small] = valid[small]
        if redo.any():
            rows_g, rows_i = np.nonzero(redo)
            ck = _exact_refit(ts, ys, ss, si_fit, C, chunk, clo, chi, params, rows_g, rows_i)
            mu[redo] = ck[:, 0]
            coef1[redo] = ck[:, 1] * params.h

        beta2 = coef1 / params.h
        vcount = valid.sum(axis=1)
        ok = vcount > 0
        mu_v = np.where(valid, mu, 0.0)
        b2_v = np.where(valid, beta2, 0.0)
        denom = np.maximum(vcount, 1)
        m_ra[c0:c1] = np.where(ok, mu_v.sum(axis=1) / denom, np.nan)
        theta_ra[c0:c1] = np.where(ok, b2_v.sum(axis=1) / denom, np.nan)
        raw = eval_kernel(params.kernel_cdf, (ts[None, :] - chunk[:, None]) / params.hbar)
        if nf == 1:
            wsum = raw.sum(axis=1)
            nw_bad = wsum < UNDERFLOW_GUARD
            theta_vals = beta2[:, 0]
        else:
            raw_v = np.where(valid, raw, 0.0)
            wsum = raw_v.sum(axis=1)
            nw_bad = wsum < UNDERFLOW_GUARD
            theta_vals = (raw_v * b2_v).sum(axis=1) / np.where(nw_bad, 1.0, wsum)
        theta_c[c0:c1] = np.where(ok & ~nw_bad, theta_vals, np.nan)
        nw_deg[c0:c1] = nw_bad
        all_failed[c0:c1] = ~ok
        dropped[c0:c1] = (n // nf) * (nf - vcount)

    return GridFitSummary(
        grid=grid,
        theta_c=theta_c,
        theta_ra=theta_ra,
        m_ra=m_ra,
        dropped=dropped,
        all_failed=all_failed,
        nw_degenerate=nw_deg,
    )
