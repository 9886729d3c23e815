import math

import numpy as np
import pytest

import npdose as nd
from npdose.condcdf import cond_cdf, nw_weights


class TestNWWeights:
    def test_compact_support_excludes(self):
        w = nw_weights([0.0, 1.0], 0.0, 0.5, nd.KernelKind.EPANECHNIKOV)
        assert np.array_equal(w.w, [1.0, 0.0])

    def test_all_equal_uniform(self):
        w = nw_weights(np.full(7, 2.5), 2.5, 0.3, nd.KernelKind.GAUSSIAN)
        assert np.allclose(w.w, 1 / 7, rtol=1e-15)

    def test_gaussian_values(self):
        w = nw_weights([-1.0, 0.0, 1.0], 0.0, 1.0, nd.KernelKind.GAUSSIAN)
        e = math.exp(-0.5)
        expect = np.array([e, 1.0, e]) / (1 + 2 * e)
        assert np.allclose(w.w, expect, rtol=1e-14)
        assert w.w.sum() == pytest.approx(1.0, abs=1e-15)

    def test_degenerate(self):
        with pytest.raises(nd.DegenerateWeights):
            nw_weights([0.0, 0.1], 5.0, 0.5, nd.KernelKind.EPANECHNIKOV)

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            nw_weights([0.0], 0.0, 0.0)


class TestCondCDF:
    def _data(self, rng, n=50, d=2):
        t = rng.uniform(-1, 1, n)
        s = rng.uniform(-1, 1, (n, d))
        return nd.Dataset(y=np.zeros(n), t=t, s=s)

    def test_extremes(self, rng):
        data = self._data(rng)
        below = data.s.min(axis=0) - 1.0
        above = data.s.max(axis=0)
        assert cond_cdf(data, below, 0.0, 0.5) == 0.0
        assert cond_cdf(data, above, 0.0, 0.5) == 1.0

    def test_half_weight(self):
        data = nd.Dataset(y=[0.0, 0.0], t=[0.0, 0.0], s=[[0.0], [1.0]])
        assert cond_cdf(data, (0.5,), 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_bounds_and_monotone(self, rng):
        data = self._data(rng)
        # random nondecreasing chain of query points, coordinatewise
        steps = rng.uniform(0, 0.4, (12, data.d))
        chain = np.cumsum(steps, axis=0) - 1.2
        vals = [cond_cdf(data, s, 0.1, 0.4) for s in chain]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))

    def test_step_function_on_concentration(self):
        # compact kernel with tiny bandwidth isolates the observation at t
        data = nd.Dataset(y=[0.0, 0.0, 0.0], t=[0.0, 1.0, 2.0], s=[[0.3], [0.6], [0.9]])
        kind = nd.KernelKind.EPANECHNIKOV
        assert cond_cdf(data, (0.59,), 1.0, 0.1, kind) == 0.0
        assert cond_cdf(data, (0.61,), 1.0, 0.1, kind) == 1.0
        assert cond_cdf(data, (0.6,), 1.0, 0.1, kind) == 1.0  # closed indicator

    def test_ties_included(self):
        data = nd.Dataset(y=[0.0, 0.0], t=[0.0, 0.0], s=[[0.5], [0.5]])
        assert cond_cdf(data, (0.5,), 0.0, 1.0) == 1.0
