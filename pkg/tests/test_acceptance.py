"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. The Monte-Carlo coverage
check is tagged slow; deselect it with `-m "not slow"` for quick runs.

Tolerances marked below as pilot-pinned were frozen from quadrature-oracle
pilot runs on this implementation (documented margins over the observed
medians), never adjusted to make a failing run pass.
"""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

import npdose as nd
from npdose.bandwidth import default_params
from npdose.bootstrap import bootstrap_curves
from npdose.estimators import (
    CurveEstimate,
    estimate_all,
    m_theta_curve,
    m_theta_fast,
    m_theta_interpolate,
    m_theta_quadrature_oracle,
    theta_C_curve,
)
from npdose.locpoly import build_design_row, local_fit


def _report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _interior_mask(grid: np.ndarray, frac: float = 0.8) -> np.ndarray:
    span = grid.max() - grid.min()
    lo = grid.min() + (1 - frac) / 2 * span
    hi = grid.max() - (1 - frac) / 2 * span
    return (grid >= lo) & (grid <= hi)


def _interior_rmse(curve: CurveEstimate, truth) -> float:
    keep = ~curve.skipped & _interior_mask(curve.grid)
    return float(np.sqrt(np.mean((curve.values[keep] - truth(curve.grid[keep])) ** 2)))


def _full_rmse(curve: CurveEstimate, truth) -> float:
    keep = ~curve.skipped
    return float(np.sqrt(np.mean((curve.values[keep] - truth(curve.grid[keep])) ** 2)))


def test_kernel_golden_values():
    errs = [
        abs(nd.kernel_moment(nd.KernelKind.EPANECHNIKOV, 2) - 0.2),
        abs(nd.kernel_sq_moment(nd.KernelKind.EPANECHNIKOV, 0) - 0.6),
        abs(nd.kernel_sq_moment(nd.KernelKind.GAUSSIAN, 0) - 0.5 / math.sqrt(math.pi)),
    ]
    _report("kernel golden values", max(errs) <= 1e-12, f"max abs err {max(errs):.2e}")


def test_wls_correctness():
    rng = np.random.default_rng(314)
    worst_resid, worst_poly = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(30, 80))
        d = int(rng.integers(0, 3))
        q = int(rng.integers(1, 4))
        t = rng.uniform(-1, 1, n)
        s = rng.uniform(-1, 1, (n, d))
        pcoef = rng.uniform(-2, 2, q + 1)
        ell = rng.uniform(-2, 2, d)
        y_poly = np.polynomial.polynomial.polyval(t, pcoef) + (s @ ell if d else 0.0)
        params = nd.EstimParams(
            h=rng.uniform(0.7, 1.5), b=tuple(rng.uniform(0.7, 1.5, d)), hbar=1.0, q=q
        )
        t0 = float(rng.uniform(-0.6, 0.6))
        s0 = rng.uniform(-0.6, 0.6, d)
        noisy = nd.Dataset(y=y_poly + rng.standard_normal(n), t=t, s=s)
        fit = local_fit(noisy, t0, s0, params)
        if not fit.rank_deficient:
            w = nd.eval_kernel(params.kernel_t, (noisy.t - t0) / params.h)
            for j in range(d):
                w = w * nd.eval_kernel(params.kernel_s, (noisy.s[:, j] - s0[j]) / params.b[j])
            X = np.array(
                [build_design_row(t0, s0, t[i], s[i], q) for i in range(n)]
            )
            coef = np.concatenate([fit.beta, fit.alpha])
            resid = np.linalg.norm(X.T @ (w * (noisy.y - X @ coef)))
            resid /= 1.0 + np.linalg.norm(X.T @ (w * noisy.y))
            worst_resid = max(worst_resid, resid)
        exact = local_fit(nd.Dataset(y=y_poly, t=t, s=s), t0, s0, params)
        mu_true = float(np.polynomial.polynomial.polyval(t0, pcoef) + (np.dot(s0, ell) if d else 0.0))
        dp = np.polynomial.polynomial.polyder(pcoef)
        th_true = float(np.polynomial.polynomial.polyval(t0, dp))
        worst_poly = max(
            worst_poly, abs(nd.mu_hat(exact) - mu_true), abs(nd.beta2_hat(exact) - th_true)
        )
    ok = worst_resid <= 1e-8 and worst_poly <= 1e-6
    _report(
        "WLS correctness (100 random configs)",
        ok,
        f"max normal-eq residual {worst_resid:.2e}, max polynomial-exactness err {worst_poly:.2e}",
    )


def test_riemann_vs_oracle():
    devs = {}
    for n in (200, 400):
        per_seed = []
        for seed in range(1, 21):
            data = nd.generate("single_conf", n, seed)
            params = default_params(data)
            fast = m_theta_curve(data, params)
            oracle = m_theta_quadrature_oracle(data, params, n_grid=4096)
            per_seed.append(float(np.max(np.abs(fast.values - oracle.values))))
        devs[n] = float(np.median(per_seed))
    ok = devs[400] <= 3.0 * devs[200]
    _report(
        "Riemann-vs-oracle error does not grow (n: 200 -> 400)",
        ok,
        f"median max dev {devs[200]:.5f} -> {devs[400]:.5f} (ratio {devs[400] / devs[200]:.2f}, limit 3)",
    )


def test_consecutive_difference_identity():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 60))
        t = rng.uniform(-2, 2, n)
        data = nd.Dataset(y=rng.standard_normal(n), t=t)
        grid = np.unique(t)
        theta_vals = 3 * rng.standard_normal(grid.shape[0])
        theta = CurveEstimate(
            grid=grid,
            values=theta_vals,
            estimator_tag="theta_C",
            params_used=nd.EstimParams(h=1.0, hbar=1.0),
        )
        curve = m_theta_fast(data, theta)
        t_sorted = np.sort(t)
        pos = np.searchsorted(grid, t_sorted)
        m_os, th_os = curve.values[pos], theta_vals[pos]
        delta = np.diff(t_sorted)
        j = np.arange(1, n)
        expect = (delta / n) * (j * th_os[:-1] + (n - j) * th_os[1:])
        if n > 1:
            worst = max(worst, float(np.abs(np.diff(m_os) - expect).max()))
    _report("consecutive-difference identity", worst <= 1e-12, f"max abs defect {worst:.2e}")


def test_mean_anchoring_oracle():
    data = nd.generate("single_conf", 500, 23)
    params = default_params(data)
    curve = m_theta_quadrature_oracle(data, params, n_grid=4096)
    pos = np.searchsorted(curve.grid, np.sort(data.t))
    gap = abs(float(curve.values[pos].mean()) - float(data.y.mean()))
    limit = 1e-3 * (1 + abs(float(data.y.mean())))
    _report("mean anchoring of the oracle integral", gap <= limit, f"|gap| {gap:.2e} <= {limit:.2e}")


# pilot-pinned (10-seed pilot): median interior RMSE 0.116 (m) and 0.153
# (theta), seed maxima 0.175 / 0.239; naive RA medians were 114 and 255
_BENCH_RMSE_M = 0.35
_BENCH_RMSE_TH = 0.45


def test_benchmark_reproduction():
    model = nd.SIM_MODELS["single_conf"]
    m_int, th_int, m_ra, th_ra = [], [], [], []
    for seed in range(1, 11):
        data = nd.generate("single_conf", 2000, seed)
        curves = estimate_all(data, default_params(data))
        m_int.append(_interior_rmse(curves["m_theta"], model.truth_m))
        th_int.append(_interior_rmse(curves["theta_C"], model.truth_theta))
        m_ra.append(_full_rmse(curves["m_RA"], model.truth_m))
        th_ra.append(_full_rmse(curves["theta_RA"], model.truth_theta))
    med = {k: float(np.median(v)) for k, v in
           [("m", m_int), ("th", th_int), ("m_ra", m_ra), ("th_ra", th_ra)]}
    ok = (
        med["m"] <= _BENCH_RMSE_M
        and med["th"] <= _BENCH_RMSE_TH
        and med["m"] < med["m_ra"]
        and med["th"] < med["th_ra"]
    )
    _report(
        "benchmark reproduction (n=2000, 10 seeds)",
        ok,
        f"median interior RMSE: m_theta {med['m']:.3f} (<= {_BENCH_RMSE_M}), "
        f"theta_C {med['th']:.3f} (<= {_BENCH_RMSE_TH}); "
        f"naive RA full-range: {med['m_ra']:.1f} / {med['th_ra']:.1f}",
    )


def test_consistency_trend():
    model = nd.SIM_MODELS["single_conf"]
    medians = []
    for n in (500, 1000, 2000):
        vals = []
        for seed in range(1, 21):
            data = nd.generate("single_conf", n, seed)
            curve = theta_C_curve(data, default_params(data))
            vals.append(_interior_rmse(curve, model.truth_theta))
        medians.append(float(np.median(vals)))
    ok = medians[0] > medians[1] > medians[2]
    _report(
        "theta_C consistency trend (n = 500, 1000, 2000)",
        ok,
        "median interior RMSE " + " -> ".join(f"{m:.4f}" for m in medians),
    )


@pytest.mark.slow
def test_bootstrap_coverage():
    reps = 100
    pt_cover, unif_cover = 0, 0
    for rep in range(reps):
        data = nd.generate("linear_conf", 500, 1000 + rep)
        params = default_params(data)
        res = bootstrap_curves(data, params, which="m_theta", B=200, alpha=0.05,
                               seed=rep, jobs=2)
        grid, base = res.base.grid, res.base.values
        # pointwise CI for m(0) = 0, built from interpolated curves at t0 = 0
        base0 = float(m_theta_interpolate(res.base, 0.0))
        repl0 = np.array([np.interp(0.0, grid, row) for row in res.replicates])
        dev0 = np.sort(np.abs(repl0 - base0))
        hw0 = dev0[min(len(dev0) - 1, math.ceil(0.95 * len(dev0)) - 1)]
        pt_cover += abs(base0 - 0.0) <= hw0
        # uniform band must cover the truth m(t) = t on the interior grid
        interior = _interior_mask(grid)
        unif_cover += bool(
            np.all(np.abs(base[interior] - grid[interior]) <= res.uniform_halfwidth)
        )
    pt_rate, unif_rate = pt_cover / reps, unif_cover / reps
    ok = 0.85 <= pt_rate <= 0.99 and 0.85 <= unif_rate <= 1.00
    _report(
        "bootstrap coverage (linear_conf, n=500, B=200, 100 reps)",
        ok,
        f"pointwise {pt_rate:.2f} in [0.85, 0.99]; uniform {unif_rate:.2f} in [0.85, 1.00]",
    )


def test_bounds_module():
    # Example-1 containment: mu(f(s), s) = 3 s1, level set {s1 = t}
    contained = True
    for t in (-1.0, 0.4, 1.2):
        sample = nd.LevelSetSample(s=[[t]], mu_val=[3 * t], v=[[3.0]], g=[[1.0]])
        lo, hi = nd.m_bound(sample, 2 * abs(t) + 1e-12)
        contained &= lo <= t <= hi and lo <= 2 * t <= hi
    sample2 = nd.LevelSetSample(
        s=[[0.0], [1.0]], mu_val=[0.0, 1.0], v=[[4.0], [4.0]], g=[[2.0], [2.0]]
    )
    l1, h1 = nd.m_bound(sample2, 1.0)
    l2, h2 = nd.m_bound(sample2, 2.0)
    mono_m = l2 <= l1 and h1 <= h2
    t1 = nd.theta_bound(sample2, 0.5)
    t2 = nd.theta_bound(sample2, 1.5)
    mono_t = t2.lo <= t1.lo and t1.hi <= t2.hi
    empty_hits = False
    try:
        nd.m_bound(
            nd.LevelSetSample(s=[[0.0], [1.0]], mu_val=[0.0, 5.0], v=[[1.0], [1.0]],
                              g=[[1.0], [1.0]]),
            1.0,
        )
    except nd.EmptyInterval:
        empty_hits = True
    ok = contained and mono_m and mono_t and empty_hits
    _report(
        "bounds: containment, monotonicity, empty detection",
        ok,
        f"containment={contained}, monotone m={mono_m}, monotone theta={mono_t}, empty={empty_hits}",
    )


def test_jobs_determinism(tmp_path):
    csv_path = tmp_path / "sim.csv"
    env_args = ["simulate", "--model", "single", "--n", "240", "--seed", "5",
                "--out", str(csv_path)]
    assert subprocess.run([sys.executable, "-m", "npdose.cli", *env_args]).returncode == 0
    outputs = []
    for jobs in (1, 8):
        out = tmp_path / f"boot_j{jobs}.json"
        proc = subprocess.run(
            [sys.executable, "-m", "npdose.cli", "bootstrap", "--input", str(csv_path),
             "--which", "m_theta", "--B", "32", "--seed", "7", "--jobs", str(jobs),
             "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1]
    _report("determinism: --jobs 1 vs --jobs 8 byte-identical JSON", ok,
            f"{len(outputs[0])} bytes compared")


def test_secondary_note():
    # the figure-rendering acceptance criterion lives in figgen/tests
    print("[INFO] secondary (figgen) criterion: run `pytest` inside figgen/")
