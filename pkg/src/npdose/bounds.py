"""Partial-identification bounds under zero treatment variation.

When the treatment is a deterministic function of the covariates, the
dose-response curve is only set-identified. Given user-supplied values of
the conditional mean on the relevant level set (and its gradients, for the
derivative), these bounds collect everything consistent with a bounded
additive covariate effect. Estimating the level-set quantities themselves
is a separate smoothing problem and out of scope here.
"""

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyInterval, ZeroGradient

__all__ = ["Interval", "LevelSetSample", "m_bound", "theta_bound", "load_level_set_csv"]


class Interval(NamedTuple):
    lo: float
    hi: float


@dataclass(frozen=True)
class LevelSetSample:
    """Points on one level set {s : f(s) = t} with local values and gradients.

    Attributes:
        s: Covariate locations, shape (m, d).
        mu_val: Conditional mean mu(f(s), s) at each location, shape (m,).
        v: Covariate gradients of mu(f(s), s), shape (m, d).
        g: Covariate gradients of f, shape (m, d).
    """

    s: np.ndarray
    mu_val: np.ndarray
    v: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.s, dtype=np.float64))
        mu = np.atleast_1d(np.asarray(self.mu_val, dtype=np.float64))
        v = np.atleast_2d(np.asarray(self.v, dtype=np.float64))
        g = np.atleast_2d(np.asarray(self.g, dtype=np.float64))
        m = mu.shape[0]
        if m == 0:
            raise ValueError("level-set sample must be nonempty")
        if s.shape[0] != m or v.shape != s.shape or g.shape != s.shape:
            raise ValueError("s, v, g must share shape (m, d) and match mu_val")
        for arr in (s, mu, v, g):
            if not np.isfinite(arr).all():
                raise ValueError("level-set entries must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mu_val", mu)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "g", g)

    @property
    def d(self) -> int:
        return self.s.shape[1]


def m_bound(sample: LevelSetSample, rho1: float) -> Interval:
    """Bound on the curve value: [max(mu) - rho1, min(mu) + rho1].

    Raises:
        EmptyInterval: rho1 is smaller than half the spread of mu over the
            level set, so no curve value is consistent with it.
    """
    if not rho1 > 0:
        raise ValueError("rho1 must be > 0")
    lo = float(sample.mu_val.max()) - rho1
    hi = float(sample.mu_val.min()) + rho1
    if lo > hi:
        raise EmptyInterval(f"m-bound empty: needs rho1 >= {0.5 * (lo - hi) + rho1:.6g}")
    return Interval(lo, hi)


def theta_bound(sample: LevelSetSample, rho2: float) -> Interval:
    """Bound on the derivative from gradient ratios, intersected over all
    level-set points and coordinates.

    Each coordinate j contributes [(v_j - sign(g_j) rho2)/g_j,
    (v_j + sign(g_j) rho2)/g_j]; the sign factor orients the interval.

    Raises:
        ZeroGradient: some used g_j is zero (the interval would divide by it).
        EmptyInterval: the intersection over points and coordinates is empty.
    """
    if not rho2 > 0:
        raise ValueError("rho2 must be > 0")
    if sample.d == 0:
        raise ValueError("theta bound needs at least one covariate coordinate")
    g = sample.g
    if np.any(g == 0.0):
        raise ZeroGradient("theta bound undefined where a treatment gradient is zero")
    sign = np.sign(g)
    lo = float(((sample.v - sign * rho2) / g).max())
    hi = float(((sample.v + sign * rho2) / g).min())
    if lo > hi:
        raise EmptyInterval("theta-bound intersection is empty")
    return Interval(lo, hi)


def load_level_set_csv(path: str) -> LevelSetSample:
    """Read a level-set sample with columns s_1..s_d, mu, v_1..v_d, g_1..g_d."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        names = [c.strip() for c in reader.fieldnames]
        s_cols = sorted((c for c in names if c.startswith("s_")), key=lambda c: int(c[2:]))
        v_cols = [f"v_{c[2:]}" for c in s_cols]
        g_cols = [f"g_{c[2:]}" for c in s_cols]
        required = set(s_cols + v_cols + g_cols + ["mu"])
        missing = required - set(names)
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    take = lambda cols: np.array([[float(r[c]) for c in cols] for r in rows])  # noqa: E731
    return LevelSetSample(
        s=take(s_cols),
        mu_val=np.array([float(r["mu"]) for r in rows]),
        v=take(v_cols),
        g=take(g_cols),
    )
