import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import compensated_sum_naive
from roughflow.controlled import (
    ControlledPath,
    controlled_norm,
    controlled_product,
    integral_path,
    local_bound_estimate,
    local_seminorm,
    remainder,
    remainder_norm,
    rough_integral,
)
from roughflow.drivers import FbmSpec, sample_fbm
from roughflow.grid import SampledPath, TimeGrid
from roughflow.roughpath import lift_path


def sine_of(x: SampledPath):
    """y = sin(X) componentwise with derivative diag(cos X), flattened."""
    n, d = x.values.shape
    deriv = np.zeros((n, d, d))
    deriv[:, np.arange(d), np.arange(d)] = np.cos(x.values)
    return ControlledPath.from_arrays(x.grid, np.sin(x.values), deriv.reshape(n, -1))


def test_remainder_definition(brownian_path):
    y = sine_of(brownian_path)
    t = brownian_path.times
    x = brownian_path.values
    expected = np.sin(x[70]) - np.sin(x[10]) - np.cos(x[10]) * (x[70] - x[10])
    assert np.allclose(remainder(y, brownian_path, t[10], t[70]), expected, atol=1e-15)


def test_function_of_path_is_controlled(brownian_path):
    # |y#(s,t)| <= |dX|^2 / 2, hence the 2 gamma norm is at most [X]_gamma^2 / 2
    from roughflow.grid import holder_seminorm

    y = sine_of(brownian_path)
    bound = 0.5 * holder_seminorm(brownian_path, 0.4) ** 2
    assert remainder_norm(y, brownian_path, 0.4) <= bound * (1 + 1e-12)


def test_reference_dimension_checked(brownian_path):
    one_d = SampledPath(brownian_path.grid, brownian_path.values[:, :1])
    with pytest.raises(ValueError):
        remainder_norm(sine_of(brownian_path), one_d)


def test_compensated_sum_matches_naive(brownian_path):
    rp = lift_path(brownian_path)
    y = sine_of(brownian_path)
    x = brownian_path.values
    n = len(x)
    a = np.sin(x)
    ad = [np.diag(np.cos(x[k])) for k in range(n)]
    t = brownian_path.times
    ref = compensated_sum_naive(a, ad, x, rp.area_index, 3, 120)
    assert rough_integral(y, rp, t[3], t[120]) == pytest.approx(ref, rel=1e-13)


def test_integral_of_time_against_itself():
    g = TimeGrid(0, 1, 33)
    x = SampledPath(g, g.nodes)
    rp = lift_path(x)
    a = ControlledPath.from_arrays(g, g.nodes, np.ones(33))
    assert rough_integral(a, rp, 0.0, 1.0) == pytest.approx(0.5, abs=1e-14)


def test_integral_path_is_controlled_by_integrand(brownian_path):
    rp = lift_path(brownian_path)
    y = sine_of(brownian_path)
    z = integral_path(y, rp)
    assert z.value.dim == 1
    assert np.array_equal(z.gubinelli_derivative.values, y.value.values)
    t = brownian_path.times
    assert z.value.values[-1, 0] - z.value.values[40, 0] == pytest.approx(rough_integral(y, rp, t[40], t[-1]))


def test_integrand_shape_must_match(brownian_path):
    rp = lift_path(brownian_path)
    bad = ControlledPath.from_arrays(brownian_path.grid, np.zeros((129, 3)), np.zeros((129, 6)))
    with pytest.raises(ValueError):
        rough_integral(bad, rp, 0.0, 1.0)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_product_derivative_is_leibniz(c1, c2):
    g = TimeGrid(0, 1, 17)
    x = SampledPath(g, np.sin(3 * g.nodes))
    a = ControlledPath.from_arrays(g, c1 + x.values, np.ones(17))
    b = ControlledPath.from_arrays(g, np.exp(c2 * x.values), c2 * np.exp(c2 * x.values))
    p = controlled_product(a, b, x)
    expected = np.exp(c2 * x.values) * (1 + c2 * (c1 + x.values))
    assert np.allclose(p.gubinelli_derivative.values, expected, rtol=1e-13, atol=1e-13)
    assert np.allclose(p.value.values, (c1 + x.values) * np.exp(c2 * x.values))


def test_product_norm_bound(brownian_path):
    # ||ab|| <= C ||a|| ||b|| with the inhomogeneous norm; C = 4 (1 + [X]) covers the grid estimates
    from roughflow.grid import holder_seminorm

    x = brownian_path
    a = sine_of(x)
    n = 129
    deriv = np.zeros((n, 2, 2))
    deriv[:, np.arange(2), np.arange(2)] = -np.sin(x.values)
    b = ControlledPath.from_arrays(x.grid, np.cos(x.values), deriv.reshape(n, -1))
    lhs = controlled_norm(controlled_product(a, b, x), x, include_initial=True)
    rhs = controlled_norm(a, x, include_initial=True) * controlled_norm(b, x, include_initial=True)
    assert lhs <= 4 * (1 + holder_seminorm(x, 0.4)) * rhs


def test_local_seminorm_monotone_and_bound():
    x = sample_fbm(FbmSpec(0.45, seed=4), n_points=257)
    y = sine_of(x)
    values = [local_seminorm(y, x, eps) for eps in (0.05, 0.1, 0.5, 1.0)]
    assert values == sorted(values)
    global_norm = controlled_norm(y, x, include_initial=True)
    for eps in (0.05, 0.25, 1.0):
        assert global_norm <= local_bound_estimate(y, x, eps)
    with pytest.raises(ValueError):
        local_bound_estimate(y, x, 0.0)
