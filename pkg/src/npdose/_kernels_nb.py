"""Optional numba kernels behind the fitting engine.

Same arithmetic as the numpy paths in `_engine`, fused into single passes:
the two-pointer window sweep replaces prefix-sum gaps (identical
accumulate-then-subtract error profile) and applies the grid-dependent
polynomial coefficients in place, and the per-fit assemble/Cholesky kernel
avoids materializing the (p, p, batch) normal-equation blocks. `_engine`
falls back to its numpy implementations when numba is absent, and the test
suite pins both against each other.
"""

import numpy as np
from numba import njit, prange

@njit(parallel=True, cache=True)
def window_moments(C, bases, tc, n_rho, base_of, gamma, lo, hi, out):
    """Window power sums of C columns, contracted with per-grid coefficients.

    For each fit column i and grid point g, a two-pointer sweep (requires
    nondecreasing lo and hi, i.e. a sorted grid) accumulates

        acc[bidx, r] = sum over k in [lo_g, hi_g) of C[k, i] * bases[k, bidx] * tc[k]^r

    for r < n_rho[bidx], then writes the moment tensor
    out[g, f, i] = sum_r gamma[g, f, r] * acc[base_of[f], r].
    """
    n, nf = C.shape
    c = lo.shape[0]
    n_bases = bases.shape[1]
    m = base_of.shape[0]
    rho_max = gamma.shape[2]
    for i in prange(nf):
        acc = np.zeros((n_bases, rho_max))
        kl = 0
        kh = 0
        for g in range(c):
            while kh < hi[g]:
                w = C[kh, i]
                t = tc[kh]
                for bidx in range(n_bases):
                    pw = w * bases[kh, bidx]
                    acc[bidx, 0] += pw
                    for r in range(1, n_rho[bidx]):
                        pw *= t
                        acc[bidx, r] += pw
                kh += 1
            while kl < lo[g]:
                w = C[kl, i]
                t = tc[kl]
                for bidx in range(n_bases):
                    pw = w * bases[kl, bidx]
                    acc[bidx, 0] -= pw
                    for r in range(1, n_rho[bidx]):
                        pw *= t
                        acc[bidx, r] -= pw
                kl += 1
            for f in range(m):
                bidx = base_of[f]
                v = 0.0
                for r in range(n_rho[bidx]):
                    v += gamma[g, f, r] * acc[bidx, r]
                out[g, f, i] = v


@njit(parallel=True, cache=True)
def assemble_solve(M, Si, b, q, d, out_c0, out_c1, out_ok):
    """Build and Cholesky-solve every fit's normal equations from the moments.

    M: (c, m, nf) moment tensor in the `_Layout` ordering; Si: (nf, d) fit
    centers; outputs are the first two (scaled-basis) coefficients plus an
    ok flag. Systems whose pivot ratio collapses keep unit pivots (finite
    garbage), are flagged ok=False, and must be re-solved by the caller.
    """
    c, m, nf = M.shape
    p = q + 1 + d
    off_us = 2 * q + 1
    off_ss = off_us + (q + 1) * d
    off_uy = off_ss + d * (d + 1) // 2
    off_sy = off_uy + (q + 1)
    # must match _engine._CHOL_PIV_REL
    piv_rel = 1e-8
    for g in prange(c):
        G = np.empty((p, p))
        rhs = np.empty(p)
        for i in range(nf):
            for p1 in range(q + 1):
                for p2 in range(p1, q + 1):
                    G[p1, p2] = M[g, p1 + p2, i]
            for j in range(d):
                sij = Si[i, j]
                for pp in range(q + 1):
                    G[pp, q + 1 + j] = (
                        M[g, off_us + j * (q + 1) + pp, i] - sij * M[g, pp, i]
                    ) / b[j]
            for j in range(d):
                for l in range(j, d):
                    idx = off_ss + j * d - j * (j - 1) // 2 + (l - j)
                    G[q + 1 + j, q + 1 + l] = (
                        M[g, idx, i]
                        - Si[i, j] * M[g, off_us + l * (q + 1), i]
                        - Si[i, l] * M[g, off_us + j * (q + 1), i]
                        + Si[i, j] * Si[i, l] * M[g, 0, i]
                    ) / (b[j] * b[l])
            for pp in range(q + 1):
                rhs[pp] = M[g, off_uy + pp, i]
            for j in range(d):
                rhs[q + 1 + j] = (M[g, off_sy + j, i] - Si[i, j] * M[g, off_uy, i]) / b[j]

            dmax = G[0, 0]
            for j in range(1, p):
                if G[j, j] > dmax:
                    dmax = G[j, j]
            piv_floor = piv_rel * dmax
            ok = True
            # Cholesky on the upper triangle: L[r][j] stored in G[j, r], j <= r
            for j in range(p):
                s = G[j, j]
                for k in range(j):
                    s -= G[k, j] * G[k, j]
                if s > piv_floor:
                    G[j, j] = np.sqrt(s)
                else:
                    ok = False
                    G[j, j] = 1.0
                for r in range(j + 1, p):
                    v = G[j, r]
                    for k in range(j):
                        v -= G[k, r] * G[k, j]
                    G[j, r] = v / G[j, j]
            for r in range(p):
                v = rhs[r]
                for k in range(r):
                    v -= G[k, r] * rhs[k]
                rhs[r] = v / G[r, r]
            for r in range(p - 1, -1, -1):
                v = rhs[r]
                for k in range(r + 1, p):
                    v -= G[r, k] * rhs[k]
                rhs[r] = v / G[r, r]
            out_c0[g, i] = rhs[0]
            out_c1[g, i] = rhs[1]
            out_ok[g, i] = ok
