import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roughflow import kernels

pytestmark = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(), reason="compiled kernels not built"
)

seeds = st.integers(0, 2 ** 31)


def both(name, *args):
    c = getattr(kernels.get_backend("compiled"), name)(*args)
    p = getattr(kernels.get_backend("python"), name)(*args)
    return c, p


def assert_same(c, p):
    assert c[0] == pytest.approx(p[0], rel=1e-12, abs=1e-300)
    assert tuple(c[1:]) == tuple(p[1:])


def data(seed, n, d):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.standard_normal((n, d)), axis=0)
    t = np.linspace(0.0, 1.0, n)
    return rng, np.ascontiguousarray(x), t


@given(seeds, st.integers(2, 40), st.floats(0.2, 1.0), st.booleans())
def test_holder_parity(seed, n, gamma, dyadic):
    _, x, t = data(seed, n, 2)
    assert_same(*both("holder_max", x, t, gamma, np.inf, dyadic))
    assert_same(*both("holder_max", x, t, gamma, 0.2, dyadic))


@given(seeds, st.integers(3, 30))
def test_remainder_and_local_parity(seed, n):
    rng, x, t = data(seed, n, 2)
    y = np.sin(x)
    yp = np.ascontiguousarray(rng.standard_normal((n, 4)))
    assert_same(*both("remainder_max", y, yp, x, t, 0.8, np.inf, False))
    assert_same(*both("local_controlled_max", y, yp, x, t, 0.4, 0.3))


@given(seeds, st.integers(3, 20))
def test_two_param_and_area_parity(seed, n):
    rng, x, t = data(seed, n, 2)
    norms = np.abs(rng.standard_normal((n, n)))
    norms[np.arange(n), np.arange(n)] = 0.0
    assert_same(*both("two_param_max", norms, t, 0.8, np.inf))
    s1 = np.ascontiguousarray(rng.standard_normal((n, 4)))
    s2 = np.ascontiguousarray(rng.standard_normal((n, 4)))
    x2 = np.ascontiguousarray(np.cos(x))
    assert_same(*both("area_ratio_max", x, s1, x2, s2, t, 0.8, np.inf, False))


@given(seeds, st.integers(3, 14))
def test_chen_parity(seed, n):
    rng, x, _ = data(seed, n, 2)
    area = np.ascontiguousarray(rng.standard_normal((n, n, 4)))
    assert_same(*both("chen_defect_max", x, area))


@given(seeds, st.integers(3, 50), st.integers(1, 4))
def test_oscillatory_parity(seed, n, stride):
    rng, _, t = data(seed, n, 1)
    re = np.cumsum(rng.standard_normal(n))
    im = np.cumsum(rng.standard_normal(n))
    assert_same(*both("oscillatory_pair_max", re, im, t, 0.55, stride))


@given(seeds, st.integers(2, 40))
def test_spatial_parity(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n, 2))
    vals = np.ascontiguousarray(np.sin(pts))
    assert_same(*both("spatial_holder_max", vals, pts, 0.5))


def test_env_forces_python_backend():
    env = dict(os.environ, ROUGHFLOW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import roughflow; print(roughflow.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    if os.environ.get("ROUGHFLOW_PURE_PYTHON", "") not in ("1", "true"):
        assert kernels.BACKEND == "compiled"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
