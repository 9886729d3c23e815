import numpy as np
import pytest

import npdose as nd


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_data(rng):
    n = 80
    t = rng.uniform(-1.5, 1.5, n)
    s = rng.uniform(-1.0, 1.0, (n, 2))
    y = np.sin(t) + s @ np.array([1.0, -2.0]) + 0.2 * rng.standard_normal(n)
    return nd.Dataset(y=y, t=t, s=s)


@pytest.fixture
def wide_params():
    # bandwidths wide enough that every local fit is well conditioned
    return nd.EstimParams(h=1.4, b=(1.1, 1.1), hbar=0.4)
