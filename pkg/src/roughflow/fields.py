"""Analytic vector fields, scalar coefficients and bump test functions.

Every field evaluates on arrays of points of shape (..., d) and returns exact
derivatives.  Contractions are written with ``einsum`` rather than ``@`` so
results do not depend on BLAS threading.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class VectorField:
    """Base class; subclasses implement the ``_value``/``_jacobian``/... hooks."""

    dim: int

    def eval(self, t, x):
        return self._value(_points(x, self.dim))

    def jacobian(self, t, x):
        """Matrix J[..., a, b] = d b_a / d x_b."""
        return self._jacobian(_points(x, self.dim))

    def divergence(self, t, x):
        return self._divergence(_points(x, self.dim))

    def grad_divergence(self, t, x):
        return self._grad_divergence(_points(x, self.dim))

    def _divergence(self, x):
        return np.trace(self._jacobian(x), axis1=-2, axis2=-1)

    def eval_all(self, t, x):
        """(value, jacobian, divergence, grad divergence) in one call."""
        return self.eval(t, x), self.jacobian(t, x), self.divergence(t, x), self.grad_divergence(t, x)

    def __add__(self, other):
        return SumField([self, other])

    def __sub__(self, other):
        return SumField([self, other.scaled(-1.0)])

    # bounds used by the flow and duality diagnostics
    def sup_bound(self):
        """Upper bound for sup_x |b(x)|."""
        raise NotImplementedError

    def lipschitz_bound(self):
        """Upper bound for sup_x |Db(x)| (operator norm)."""
        raise NotImplementedError


def _points(x, dim):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != dim:
        if dim == 1:
            x = x[..., None]
        else:
            raise ValueError(f"points must have trailing dimension {dim}, got shape {x.shape}")
    return x


class TrigField(VectorField):
    """Real trigonometric polynomial b(x) = sum_m c_m exp(i k_m . x).

    ``modes`` is an integer array (M, d) and ``coeffs`` a complex array (M, d);
    the coefficient of -k must be the conjugate of the coefficient of k.
    """

    def __init__(self, modes, coeffs, check=True):
        modes = np.atleast_2d(np.asarray(modes, dtype=np.float64))
        coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(modes.shape)
        if np.any(modes != np.round(modes)):
            raise ValueError("trig modes must be integer vectors")
        self.dim = modes.shape[1]
        self.modes = modes
        self.coeffs = coeffs
        if check:
            self._check_hermitian()
        # precomputed real data for evaluation
        self._re = coeffs.real.copy()
        self._im = coeffs.imag.copy()
        self._k_re = np.einsum("ma,ma->m", modes, self._re)
        self._k_im = np.einsum("ma,ma->m", modes, self._im)

    def _check_hermitian(self):
        lookup = {}
        for k, c in zip(self.modes, self.coeffs):
            key = tuple(int(v) for v in k)
            lookup[key] = lookup.get(key, 0) + c
        for key, c in lookup.items():
            partner = lookup.get(tuple(-v for v in key))
            scale = max(1.0, float(np.max(np.abs(c))))
            if partner is None:
                if np.max(np.abs(c), initial=0.0) > 1e-14 * scale:
                    raise ValueError(f"mode {key} has no conjugate partner; field would be complex")
            elif np.max(np.abs(c - np.conj(partner))) > 1e-12 * scale:
                raise ValueError(f"coefficients of {key} and its negative are not conjugate")

    @classmethod
    def from_sincos(cls, dim, terms):
        """Build from terms (k, a, b) meaning a cos(k.x) + b sin(k.x), with a, b in R^d."""
        acc = {}
        for k, a, b in terms:
            k = tuple(int(v) for v in np.atleast_1d(k))
            if len(k) != dim:
                raise ValueError(f"frequency {k} does not have dimension {dim}")
            a = np.broadcast_to(np.asarray(a, dtype=np.float64), (dim,))
            b = np.broadcast_to(np.asarray(b, dtype=np.float64), (dim,))
            neg = tuple(-v for v in k)
            if k == neg:
                acc[k] = acc.get(k, 0) + a.astype(np.complex128)
                continue
            acc[k] = acc.get(k, 0) + 0.5 * a - 0.5j * b
            acc[neg] = acc.get(neg, 0) + 0.5 * a + 0.5j * b
        keys = sorted(acc)
        if not keys:
            return cls(np.zeros((1, dim)), np.zeros((1, dim)))
        return cls(np.array(keys, dtype=np.float64), np.array([acc[k] for k in keys]))

    def _phases(self, x):
        theta = np.einsum("...a,ma->...m", x, self.modes)
        return np.cos(theta), np.sin(theta)

    def _value(self, x):
        cos, sin = self._phases(x)
        return np.einsum("...m,ma->...a", cos, self._re) - np.einsum("...m,ma->...a", sin, self._im)

    def _jacobian(self, x):
        cos, sin = self._phases(x)
        # d/dx_b of Re(c e^{ik.x}) = -k_b (Re c sin + Im c cos)
        w_re = np.einsum("...m,ma->...ma", sin, self._re) + np.einsum("...m,ma->...ma", cos, self._im)
        return -np.einsum("...ma,mb->...ab", w_re, self.modes)

    def _divergence(self, x):
        cos, sin = self._phases(x)
        return -np.einsum("...m,m->...", sin, self._k_re) - np.einsum("...m,m->...", cos, self._k_im)

    def _grad_divergence(self, x):
        cos, sin = self._phases(x)
        w = -np.einsum("...m,m->...m", cos, self._k_re) + np.einsum("...m,m->...m", sin, self._k_im)
        return np.einsum("...m,mb->...b", w, self.modes)

    def eval_all(self, t, x):
        x = _points(x, self.dim)
        cos, sin = self._phases(x)
        value = np.einsum("...m,ma->...a", cos, self._re) - np.einsum("...m,ma->...a", sin, self._im)
        w_re = np.einsum("...m,ma->...ma", sin, self._re) + np.einsum("...m,ma->...ma", cos, self._im)
        jac = -np.einsum("...ma,mb->...ab", w_re, self.modes)
        div = -np.einsum("...m,m->...", sin, self._k_re) - np.einsum("...m,m->...", cos, self._k_im)
        w = -np.einsum("...m,m->...m", cos, self._k_re) + np.einsum("...m,m->...m", sin, self._k_im)
        return value, jac, div, np.einsum("...m,mb->...b", w, self.modes)

    def coefficient_magnitudes(self):
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=1))

    def sup_bound(self):
        return float(np.sum(self.coefficient_magnitudes()))

    def lipschitz_bound(self):
        return float(np.sum(self.coefficient_magnitudes() * np.linalg.norm(self.modes, axis=1)))

    def scaled(self, factor):
        return TrigField(self.modes, self.coeffs * factor, check=False)


class LinearField(VectorField):
    """b(x) = A x."""

    def __init__(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"linear field needs a square matrix, got {matrix.shape}")
        self.matrix = matrix
        self.dim = matrix.shape[0]

    def _value(self, x):
        return np.einsum("ab,...b->...a", self.matrix, x)

    def _jacobian(self, x):
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape).copy()

    def _divergence(self, x):
        return np.full(x.shape[:-1], float(np.trace(self.matrix)))

    def _grad_divergence(self, x):
        return np.zeros_like(x)

    def sup_bound(self):
        return 0.0 if not np.any(self.matrix) else np.inf

    def lipschitz_bound(self):
        return float(np.linalg.norm(self.matrix, 2))

    def scaled(self, factor):
        return LinearField(self.matrix * factor)


class ConstantField(VectorField):
    def __init__(self, vector):
        self.vector = np.atleast_1d(np.asarray(vector, dtype=np.float64))
        self.dim = self.vector.shape[0]

    def _value(self, x):
        return np.broadcast_to(self.vector, x.shape).copy()

    def _jacobian(self, x):
        return np.zeros(x.shape + (self.dim,))

    def _divergence(self, x):
        return np.zeros(x.shape[:-1])

    def _grad_divergence(self, x):
        return np.zeros_like(x)

    def sup_bound(self):
        return float(np.linalg.norm(self.vector))

    def lipschitz_bound(self):
        return 0.0

    def scaled(self, factor):
        return ConstantField(self.vector * factor)


class SumField(VectorField):
    def __init__(self, parts):
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, SumField) else [p])
        dims = {p.dim for p in flat}
        if len(dims) != 1:
            raise ValueError(f"cannot add fields of dimensions {sorted(dims)}")
        self.parts = flat
        self.dim = dims.pop()

    def eval(self, t, x):
        return sum(p.eval(t, x) for p in self.parts)

    def eval_all(self, t, x):
        parts = [p.eval_all(t, x) for p in self.parts]
        return tuple(sum(q[i] for q in parts) for i in range(4))

    def jacobian(self, t, x):
        return sum(p.jacobian(t, x) for p in self.parts)

    def divergence(self, t, x):
        return sum(p.divergence(t, x) for p in self.parts)

    def grad_divergence(self, t, x):
        return sum(p.grad_divergence(t, x) for p in self.parts)

    def sup_bound(self):
        return float(sum(p.sup_bound() for p in self.parts))

    def lipschitz_bound(self):
        return float(sum(p.lipschitz_bound() for p in self.parts))

    def scaled(self, factor):
        return SumField([p.scaled(factor) for p in self.parts])


class ModulatedField(VectorField):
    """m(t) b(x) with m piecewise constant: ``levels[k]`` on [edges[k-1], edges[k])."""

    def __init__(self, field: VectorField, edges, levels):
        self.field = field
        self.dim = field.dim
        self.edges = np.asarray(edges, dtype=np.float64)
        self.levels = np.asarray(levels, dtype=np.float64)
        if self.levels.shape != (len(self.edges) + 1,):
            raise ValueError("need one more level than edges")
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("modulation edges must be strictly increasing")

    def factor(self, t):
        return self.levels[np.searchsorted(self.edges, t, side="right")]

    def eval(self, t, x):
        return self.factor(t) * self.field.eval(t, x)

    def eval_all(self, t, x):
        m = self.factor(t)
        return tuple(m * v for v in self.field.eval_all(t, x))

    def jacobian(self, t, x):
        return self.factor(t) * self.field.jacobian(t, x)

    def divergence(self, t, x):
        return self.factor(t) * self.field.divergence(t, x)

    def grad_divergence(self, t, x):
        return self.factor(t) * self.field.grad_divergence(t, x)

    def sup_bound(self):
        return float(np.max(np.abs(self.levels))) * self.field.sup_bound()

    def lipschitz_bound(self):
        return float(np.max(np.abs(self.levels))) * self.field.lipschitz_bound()

    def scaled(self, factor):
        return ModulatedField(self.field.scaled(factor), self.edges, self.levels)


def _spectrum(b: VectorField):
    """(modes, coeffs, time factor) for discrete-spectrum fields, else None."""
    if isinstance(b, TrigField):
        return [(b.modes, b.coeffs)], 1.0
    if isinstance(b, ConstantField):
        return [(np.zeros((1, b.dim)), b.vector[None, :].astype(np.complex128))], 1.0
    if isinstance(b, ModulatedField):
        inner = _spectrum(b.field)
        if inner is None:
            return None
        return inner[0], inner[1] * float(np.max(np.abs(b.levels)))
    if isinstance(b, SumField):
        pieces = []
        for p in b.parts:
            sp = _spectrum(p)
            if sp is None:
                return None
            pieces.extend((m, c * sp[1]) for m, c in sp[0])
        return pieces, 1.0
    return None


def fl_norm(b: VectorField, alpha):
    """Fourier-Lebesgue norm sum_k |c_k| (1 + |k|)^alpha (coefficients of equal k merged)."""
    sp = _spectrum(b)
    if sp is None:
        raise ValueError("FL norm defined for discrete-spectrum fields only")
    pieces, factor = sp
    acc = {}
    for modes, coeffs in pieces:
        for k, c in zip(modes, coeffs):
            key = tuple(int(v) for v in k)
            acc[key] = acc.get(key, 0) + c
    total = 0.0
    for key in sorted(acc):
        total += np.sqrt(np.sum(np.abs(acc[key]) ** 2)) * (1.0 + np.linalg.norm(key)) ** alpha
    return float(factor * total)


def holder_cb_norm(b: VectorField, alpha, probe_points, t=0.0):
    """Grid estimate of sup |b| + sup_{x != y} |b(x) - b(y)| / |x - y|^alpha over probe points."""
    if not (0 < alpha <= 1):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    pts = _points(probe_points, b.dim).reshape(-1, b.dim)
    vals = b.eval(t, pts).reshape(len(pts), -1)
    sup = float(np.max(np.linalg.norm(vals, axis=1)))
    return sup + kernels.spatial_holder_max(vals, pts, alpha)[0]


def mollify(b: VectorField, eps):
    """Gaussian Fourier multiplier: c_k -> c_k exp(-eps^2 |k|^2 / 2)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if isinstance(b, TrigField):
        damp = np.exp(-0.5 * eps ** 2 * np.sum(b.modes ** 2, axis=1))
        return TrigField(b.modes, b.coeffs * damp[:, None], check=False)
    if isinstance(b, ConstantField):
        return b
    if isinstance(b, SumField):
        return SumField([mollify(p, eps) for p in b.parts])
    if isinstance(b, ModulatedField):
        return ModulatedField(mollify(b.field, eps), b.edges, b.levels)
    raise ValueError(f"mollification is not available for {type(b).__name__}")


def lin_norm(b: VectorField):
    """sup |b(x)| / (1 + |x|): exact for linear and constant fields, an upper bound otherwise."""
    if isinstance(b, LinearField):
        return float(np.linalg.norm(b.matrix, 2))
    if isinstance(b, ConstantField):
        return float(np.linalg.norm(b.vector))
    if isinstance(b, SumField):
        return float(sum(lin_norm(p) for p in b.parts))
    if isinstance(b, ModulatedField):
        return float(np.max(np.abs(b.levels))) * lin_norm(b.field)
    return b.sup_bound()


# scalar zero-order coefficients


class ScalarField:
    def __call__(self, t, x):
        raise NotImplementedError


class ConstantScalar(ScalarField):
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.full(x.shape[:-1], self.value)

    def sup_bound(self):
        return abs(self.value)


class DivergenceScalar(ScalarField):
    """c = div b, the continuity-equation coefficient."""

    def __init__(self, field: VectorField):
        self.field = field

    def __call__(self, t, x):
        return self.field.divergence(t, x)

    def sup_bound(self):
        return self.field.lipschitz_bound() * np.sqrt(self.field.dim)


class TestFunction:
    """Bump times polynomial: phi(x) = (1 + y_1)^degree exp(-1 / (1 - |y|^2)), y = (x - center) / radius.

    Zero outside the open ball; value, gradient and Hessian are closed-form.
    """

    __test__ = False  # not a pytest class

    def __init__(self, center, radius, degree=0):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        self.dim = self.center.shape[0]
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        if int(degree) != degree or degree < 0:
            raise ValueError("degree must be a nonnegative integer")
        self.degree = int(degree)

    def _parts(self, x):
        x = _points(x, self.dim)
        y = (x - self.center) / self.radius
        rho = np.sum(y * y, axis=-1)
        inside = rho < 1.0
        q = np.where(inside, 1.0 - rho, 1.0)
        bump = np.where(inside, np.exp(-1.0 / q), 0.0)
        return y, q, bump, inside

    def _poly(self, y):
        n = self.degree
        base = 1.0 + y[..., 0]
        p = base ** n
        dp = n * base ** (n - 1) if n >= 1 else np.zeros_like(base)
        ddp = n * (n - 1) * base ** (n - 2) if n >= 2 else np.zeros_like(base)
        return p, dp, ddp

    def __call__(self, x):
        y, q, bump, _ = self._parts(x)
        return self._poly(y)[0] * bump

    def gradient(self, x):
        y, q, bump, _ = self._parts(x)
        p, dp, _ = self._poly(y)
        grad_b = (-2.0 * bump / q ** 2)[..., None] * y
        grad = p[..., None] * grad_b
        grad[..., 0] += dp * bump
        return grad / self.radius

    def hessian(self, x):
        y, q, bump, _ = self._parts(x)
        p, dp, ddp = self._poly(y)
        d = self.dim
        eye = np.eye(d)
        grad_b = (-2.0 * bump / q ** 2)[..., None] * y
        hess_b = bump[..., None, None] * (
            (-2.0 / q ** 2)[..., None, None] * eye
            + (4.0 / q ** 4 - 8.0 / q ** 3)[..., None, None] * y[..., :, None] * y[..., None, :]
        )
        hess = p[..., None, None] * hess_b
        hess[..., 0, :] += dp[..., None] * grad_b
        hess[..., :, 0] += dp[..., None] * grad_b
        hess[..., 0, 0] += ddp * bump
        return hess / self.radius ** 2

    def support_radius(self):
        return self.radius


def field_from_spec(spec: dict) -> VectorField:
    """Build a field from its JSON description (see the README for the schema)."""
    kind = spec["type"]
    if kind == "trig":
        modes = [m["k"] for m in spec["modes"]]
        coeffs = [np.asarray(m["re"], dtype=np.float64) + 1j * np.asarray(m.get("im", [0.0] * len(m["re"])))
                  for m in spec["modes"]]
        field = TrigField(modes, coeffs)
    elif kind == "sincos":
        field = TrigField.from_sincos(
            spec["dim"],
            [(t["k"], t.get("cos", 0.0), t.get("sin", 0.0)) for t in spec["terms"]],
        )
    elif kind == "linear":
        field = LinearField(spec["matrix"])
    elif kind == "constant":
        field = ConstantField(spec["vector"])
    elif kind == "sum":
        field = SumField([field_from_spec(p) for p in spec["parts"]])
    else:
        raise ValueError(f"unknown field type {kind!r}")
    if "modulation" in spec:
        mod = spec["modulation"]
        field = ModulatedField(field, mod["edges"], mod["levels"])
    if "scale" in spec:
        field = field.scaled(float(spec["scale"]))
    return field
