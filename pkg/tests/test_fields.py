import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import bump, fd_gradient, fd_jacobian
from roughflow.fields import (
    ConstantField,
    ConstantScalar,
    DivergenceScalar,
    LinearField,
    ModulatedField,
    SumField,
    TestFunction,
    TrigField,
    field_from_spec,
    fl_norm,
    holder_cb_norm,
    lin_norm,
    mollify,
)

point2 = arrays(np.float64, (2,), elements=st.floats(-3, 3))


def trig2():
    return TrigField.from_sincos(2, [
        ((1, 0), (0.0, 0.3), (-0.5, 0.0)),
        ((0, 2), (0.2, 0.0), (0.0, -0.4)),
        ((1, 1), (0.0, 0.0), (0.1, 0.1)),
    ])


def test_sincos_values():
    b = TrigField.from_sincos(1, [((2,), (0.5,), (0.25,))])
    x = np.array([[0.3]])
    assert b.eval(0, x)[0, 0] == pytest.approx(0.5 * np.cos(0.6) + 0.25 * np.sin(0.6))
    assert b.jacobian(0, x)[0, 0, 0] == pytest.approx(-1.0 * np.sin(0.6) + 0.5 * np.cos(0.6))


@given(point2)
def test_trig_derivatives_match_finite_differences(x):
    b = trig2()
    jac = b.jacobian(0, x[None])[0]
    assert np.allclose(jac, fd_jacobian(lambda p: b.eval(0, p[None])[0], x), atol=1e-8)
    assert b.divergence(0, x[None])[0] == pytest.approx(np.trace(jac), abs=1e-12)
    gd = fd_gradient(lambda p: b.divergence(0, p[None])[0], x)
    assert np.allclose(b.grad_divergence(0, x[None])[0], gd, atol=1e-7)


def test_eval_all_agrees_with_separate_calls():
    b = trig2() + LinearField([[0.1, 0.0], [0.2, -0.3]])
    pts = np.random.default_rng(1).uniform(-2, 2, (5, 3, 2))
    v, j, d, g = b.eval_all(0.3, pts)
    assert np.allclose(v, b.eval(0.3, pts))
    assert np.allclose(j, b.jacobian(0.3, pts))
    assert np.allclose(d, b.divergence(0.3, pts))
    assert np.allclose(g, b.grad_divergence(0.3, pts))


def test_trig_requires_conjugate_pairs():
    with pytest.raises(ValueError, match="conjugate"):
        TrigField([[1]], [[1.0 + 0j]])
    with pytest.raises(ValueError):
        TrigField([[1], [-1]], [[1.0 + 1j], [1.0 + 1j]])
    TrigField([[1], [-1]], [[1.0 + 1j], [1.0 - 1j]])


def test_bounds():
    b = trig2()
    pts = np.random.default_rng(0).uniform(-5, 5, (4000, 2))
    assert np.max(np.linalg.norm(b.eval(0, pts), axis=1)) <= b.sup_bound()
    assert np.max(np.linalg.norm(b.jacobian(0, pts), ord=2, axis=(1, 2))) <= b.lipschitz_bound()
    lin = LinearField([[0.0, 2.0], [0.0, 0.0]])
    assert lin.sup_bound() == np.inf and lin_norm(lin) == pytest.approx(2.0)
    assert LinearField(np.zeros((2, 2))).sup_bound() == 0.0


def test_constant_and_sum_fields():
    b = ConstantField([1.0, -2.0]) + LinearField(np.eye(2))
    x = np.array([[1.0, 1.0]])
    assert np.allclose(b.eval(0, x), [[2.0, -1.0]])
    assert b.divergence(0, x)[0] == 2.0
    assert len(SumField([b, b]).parts) == 4
    with pytest.raises(ValueError):
        ConstantField([1.0]) + ConstantField([1.0, 2.0])


def test_modulated_field_switches_at_edges():
    b = ModulatedField(ConstantField([1.0]), [0.5], [2.0, -1.0])
    x = np.zeros((1, 1))
    assert b.eval(0.49, x)[0, 0] == 2.0
    assert b.eval(0.5, x)[0, 0] == -1.0
    assert b.sup_bound() == 2.0
    with pytest.raises(ValueError):
        ModulatedField(ConstantField([1.0]), [0.5], [1.0])


def test_fl_norm_values():
    # sin(x) = (e^{ix} - e^{-ix}) / 2i: two modes of magnitude 1/2 at |k| = 1
    b = TrigField.from_sincos(1, [((1,), (0.0,), (1.0,))])
    assert fl_norm(b, 0.0) == pytest.approx(1.0)
    assert fl_norm(b, 1.0) == pytest.approx(2.0)
    # equal modes merge: b - b has norm zero
    assert fl_norm(b - b, 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="discrete-spectrum"):
        fl_norm(LinearField([[1.0]]), 1.0)


@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_fl_norm_monotone_in_alpha(alpha, extra):
    b = trig2()
    assert fl_norm(b, alpha + extra) >= fl_norm(b, alpha)


def test_mollify_damps_modes_and_converges():
    b = trig2()
    assert np.allclose(mollify(b, 0.0).coeffs, b.coeffs)
    m = mollify(b, 0.5)
    expected = b.coeffs * np.exp(-0.125 * np.sum(b.modes ** 2, axis=1))[:, None]
    assert np.allclose(m.coeffs, expected)
    pts = np.random.default_rng(2).uniform(-3, 3, (50, 2))
    errs = [np.max(np.abs(mollify(b, e).eval(0, pts) - b.eval(0, pts))) for e in (0.4, 0.2, 0.1)]
    assert errs[0] > errs[1] > errs[2]
    assert fl_norm(m, 1.0) <= fl_norm(b, 1.0)
    with pytest.raises(ValueError):
        mollify(LinearField([[1.0]]), 0.1)


def test_holder_cb_norm_of_sine():
    b = TrigField.from_sincos(1, [((1,), (0.0,), (1.0,))])
    pts = np.linspace(-np.pi, np.pi, 401)[:, None]
    val = holder_cb_norm(b, 1.0, pts)
    assert val == pytest.approx(2.0, rel=1e-4)


def test_scalar_fields():
    c = ConstantScalar(0.3)
    assert np.allclose(c(0, np.zeros((4, 2))), 0.3)
    div = DivergenceScalar(LinearField([[1.0, 0.0], [0.0, 2.0]]))
    assert np.allclose(div(0, np.ones((3, 2))), 3.0)


@pytest.mark.parametrize("degree", [0, 1, 3])
def test_test_function_against_oracle(degree):
    phi = TestFunction([0.2, -0.1], 0.7, degree)
    rng = np.random.default_rng(degree)
    pts = phi.center + rng.uniform(-0.69, 0.69, (30, 2))
    for x in pts:
        f = lambda p: bump(p, phi.center, phi.radius, degree)  # noqa: E731
        assert phi(x[None])[0] == pytest.approx(f(x), abs=1e-15)
        if np.linalg.norm(x - phi.center) < 0.6:
            assert np.allclose(phi.gradient(x[None])[0], fd_gradient(f, x), atol=1e-7)
            hess_fd = fd_jacobian(lambda p: phi.gradient(p[None])[0], x)
            assert np.allclose(phi.hessian(x[None])[0], hess_fd, atol=1e-6)


def test_test_function_support():
    phi = TestFunction([0.0], 0.5)
    assert phi(np.array([[0.5]]))[0] == 0.0
    assert phi(np.array([[0.0]]))[0] == pytest.approx(np.exp(-1.0))
    assert phi.support_radius() == 0.5
    with pytest.raises(ValueError):
        TestFunction([0.0], 0.0)


def test_field_from_spec_round_trip():
    spec = {
        "type": "sum",
        "parts": [
            {"type": "trig", "modes": [{"k": [1], "re": [0.5], "im": [0.1]}, {"k": [-1], "re": [0.5], "im": [-0.1]}]},
            {"type": "constant", "vector": [0.2]},
        ],
        "modulation": {"edges": [0.5], "levels": [1.0, 2.0]},
        "scale": 0.5,
    }
    b = field_from_spec(spec)
    x = np.array([[0.4]])
    inner = np.cos(0.4) - 0.2 * np.sin(0.4) + 0.2
    assert b.eval(0.2, x)[0, 0] == pytest.approx(0.5 * inner)
    assert b.eval(0.7, x)[0, 0] == pytest.approx(inner)
    with pytest.raises(ValueError):
        field_from_spec({"type": "bogus"})
