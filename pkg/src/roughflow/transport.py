"""Rough transport and continuity equations solved by characteristics.

The solution is u_t(x) = u0(Phi_t^{-1}(x)) exp(-int_0^t c(r, Phi_r(Phi_t^{-1}(x))) dr).
Pairings against test functions are computed in Lagrangian form,

    u_t(psi) = int u0(y) E_t(y) psi(Phi_t(y)) det DPhi_t(y) dy,

on a uniform box grid of initial points, which needs only forward flows with
their Jacobians.  ``eulerian_pairing`` evaluates the same pairing by
quadrature of ``strong_solution`` on a grid covering the test function and
serves as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .controlled import ControlledPath, integral_path, rough_integral
from .errors import DomainTooSmallError
from .fields import ConstantScalar, ScalarField, TestFunction, VectorField
from .flows import inverse_flow, march
from .grid import SampledPath, TwoParamFunction, _window, holder_seminorm
from .parallel import chunk_slices, ordered_map
from .roughpath import RoughPath, check_gamma

POINT_CHUNK = 512
POINTS_PER_RADIUS = 128


# initial data


class InitialCondition:
    def __call__(self, x):
        raise NotImplementedError

    def sup_bound(self):
        raise NotImplementedError


class ConstantInitial(InitialCondition):
    def __init__(self, value=1.0):
        self.value = float(value)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.full(x.shape[:-1], self.value)

    def sup_bound(self):
        return abs(self.value)


class GaussianInitial(InitialCondition):
    """amplitude * exp(-|x - center|^2 / (2 width^2))."""

    def __init__(self, center, width, amplitude=1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        self.width = float(width)
        self.amplitude = float(amplitude)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        r2 = np.sum((x - self.center) ** 2, axis=-1)
        return self.amplitude * np.exp(-0.5 * r2 / self.width ** 2)

    def sup_bound(self):
        return abs(self.amplitude)


class CosineInitial(InitialCondition):
    """amplitude * cos(k . x + phase); a sine with phase -pi/2."""

    def __init__(self, wavevector, amplitude=1.0, phase=0.0):
        self.wavevector = np.atleast_1d(np.asarray(wavevector, dtype=np.float64))
        self.amplitude = float(amplitude)
        self.phase = float(phase)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.amplitude * np.cos(np.einsum("...a,a->...", x, self.wavevector) + self.phase)

    def sup_bound(self):
        return abs(self.amplitude)


def initial_from_spec(spec: dict) -> InitialCondition:
    kind = spec["type"]
    if kind == "constant":
        return ConstantInitial(spec.get("value", 1.0))
    if kind == "gaussian":
        return GaussianInitial(spec["center"], spec["width"], spec.get("amplitude", 1.0))
    if kind == "cosine":
        return CosineInitial(spec["wavevector"], spec.get("amplitude", 1.0), spec.get("phase", 0.0))
    raise ValueError(f"unknown initial condition type {kind!r}")


@dataclass
class TransportProblem:
    """du + b.grad u dt + grad u . dX + c u dt = 0 with initial value u0."""

    b: VectorField
    driver: RoughPath
    u0: InitialCondition
    c: ScalarField = field(default_factory=lambda: ConstantScalar(0.0))
    gamma: float | None = None

    def __post_init__(self):
        self.gamma = check_gamma(self.driver.gamma if self.gamma is None else self.gamma)
        if self.b.dim != self.driver.dim:
            raise ValueError(f"field dimension {self.b.dim} does not match driver dimension {self.driver.dim}")

    @property
    def dim(self):
        return self.b.dim

    @property
    def grid(self):
        return self.driver.grid

    def sup_bound(self):
        """Bound for sup |u| on [0, T]: |u0|_inf exp(T sup|c|)."""
        c_sup = self.c.sup_bound() if hasattr(self.c, "sup_bound") else np.inf
        return self.u0.sup_bound() * math.exp(self.grid.horizon * c_sup)

    def displacement_radius(self):
        """Bound for the displacement of characteristics over the horizon."""
        horizon = self.grid.horizon
        scale = max(horizon, horizon ** self.gamma)
        return 2.0 * scale * (self.b.sup_bound() + holder_seminorm(self.driver.base, self.gamma))


def _det(m):
    d = m.shape[-1]
    if d == 1:
        return m[..., 0, 0]
    if d == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return np.linalg.det(m)


def box_grid(radius, spacing, dim, center=None):
    """Uniform grid on [center - radius, center + radius]^dim; returns (points, cell volume)."""
    m = int(math.ceil(2.0 * radius / spacing - 1e-9))
    axis = -radius + spacing * np.arange(m + 1)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    if center is not None:
        pts = pts + np.asarray(center, dtype=np.float64)
    return pts, spacing ** dim


def _default_spacing(phis):
    return min(p.radius for p in phis) / POINTS_PER_RADIUS


def _forward_states(problem: TransportProblem, y, cell, stop_index=None):
    """Yield ``(t, x, w, u)`` at each node for initial points ``y``.

    ``x`` = Phi_t(y), ``u`` = u_t(x) and ``w`` = cell * u * det DPhi_t(y) is the
    Lagrangian quadrature weight.
    """
    base = problem.driver.base
    stop = base.grid.n_points - 1 if stop_index is None else stop_index
    times = base.times[: stop + 1]
    xvals = base.values[: stop + 1] - base.values[0]
    u_start = problem.u0(y)
    log_e = np.zeros(len(y))
    prev_c, prev_t = None, None
    for k, x, jac in march(problem.b, times, xvals, y, with_derivative=True):
        t = times[k]
        c_now = np.broadcast_to(problem.c(t, x), log_e.shape)
        if prev_c is not None:
            log_e = log_e - 0.5 * (t - prev_t) * (prev_c + c_now)
        prev_c, prev_t = c_now, t
        u = u_start * np.exp(log_e)
        yield t, x, cell * u * _det(jac), u


def _lagrangian_sums(problem: TransportProblem, ypts, cell, reducer, combine, threads=None):
    """Reduce ``reducer(sl, t, x, w, u)`` over all initial points at every node.

    ``sl`` is the slice of ``ypts`` the call covers.

    ``reducer`` returns a tuple of arrays; ``combine`` names, per entry, how
    chunk results merge ("sum" or "max").  Chunks are fixed and merged in
    order, so results do not depend on ``threads``.
    """

    def run(sl):
        return [reducer(sl, *state) for state in _forward_states(problem, ypts[sl], cell)]

    parts = ordered_map(run, chunk_slices(len(ypts), POINT_CHUNK), threads)
    total = parts[0]
    for part in parts[1:]:
        total = [
            tuple(np.maximum(x, y) if how == "max" else x + y for x, y, how in zip(a, b, combine))
            for a, b in zip(total, part)
        ]
    return total


@dataclass
class WeakSolutionSample:
    """Pairings of the characteristics solution with a battery of test functions.

    Arrays are indexed [time node, test function, ...]; ``drift`` holds
    u_t(div(b phi) - c phi).
    """

    problem: TransportProblem
    phis: list
    spacing: float
    radius: float
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    drift: np.ndarray
    sup_abs: float

    @property
    def grid(self):
        return self.problem.grid

    def index_of(self, phi):
        for i, p in enumerate(self.phis):
            if p is phi:
                return i
        raise ValueError("test function is not part of this sample")

    def values_at(self, t, points):
        """u_t at arbitrary points through the inverse flow."""
        return strong_solution(self.problem, t, points)


def sample_weak_solution(problem: TransportProblem, phis, spacing=None, radius=None,
                         threads=None) -> WeakSolutionSample:
    """Lagrangian pairings u_t(phi), u_t(grad phi), u_t(hess phi), u_t(div(b phi) - c phi) at every node."""
    phis = list(phis) if isinstance(phis, (list, tuple)) else [phis]
    d = problem.dim
    spacing = _default_spacing(phis) if spacing is None else float(spacing)
    r_phi = max(float(np.linalg.norm(p.center)) + p.radius for p in phis)
    required = r_phi + problem.displacement_radius()
    if radius is None:
        if not np.isfinite(required):
            raise ValueError("unbounded drift: pass an explicit spatial radius")
        radius = required
    elif np.isfinite(required) and radius < required * (1 - 1e-12):
        raise DomainTooSmallError(required, radius)
    ypts, cell = box_grid(radius, spacing, d)
    edge = np.any(np.abs(ypts) > radius - 1.5 * spacing, axis=1)
    b, c = problem.b, problem.c

    def reducer(sl, t, x, w, u):
        bx = b.eval(t, x)
        divb = b.divergence(t, x)
        cx = np.broadcast_to(c(t, x), w.shape)
        vals, grads, hesss, drifts = [], [], [], []
        leak = 0.0
        for p in phis:
            f = p(x)
            g = p.gradient(x)
            h = p.hessian(x)
            vals.append(np.sum(w * f))
            grads.append(np.sum(w[:, None] * g, axis=0))
            hesss.append(np.sum(w[:, None, None] * h, axis=0))
            drifts.append(np.sum(w * ((divb - cx) * f + np.einsum("pa,pa->p", bx, g))))
            leak = max(leak, float(np.max(np.abs(f[edge[sl]]), initial=0.0)))
        return (
            np.array(vals), np.array(grads), np.array(hesss), np.array(drifts),
            np.array([leak]), np.array([float(np.max(np.abs(u)))]),
        )

    sums = _lagrangian_sums(problem, ypts, cell, reducer, ("sum",) * 4 + ("max",) * 2, threads)
    value = np.stack([s[0] for s in sums])
    grad = np.stack([s[1] for s in sums])
    hess = np.stack([s[2] for s in sums])
    drift = np.stack([s[3] for s in sums])
    if max(float(s[4][0]) for s in sums) > 0.0:
        raise DomainTooSmallError(required if np.isfinite(required) else 2.0 * radius, radius)
    sup_abs = max(float(s[5][0]) for s in sums)
    return WeakSolutionSample(problem, phis, spacing, float(radius), value, grad, hess, drift, sup_abs)


def pair(sample: WeakSolutionSample, phi: TestFunction, t, order=0):
    """u_t(phi), u_t(grad phi) or u_t(hess phi) for ``order`` 0, 1 or 2."""
    i = sample.index_of(phi)
    k = sample.grid.index_of(t)
    if order == 0:
        return float(sample.value[k, i])
    if order == 1:
        return sample.grad[k, i].copy()
    if order == 2:
        return sample.hess[k, i].copy()
    raise ValueError("order must be 0, 1 or 2")


def strong_solution(problem: TransportProblem, t, x, threads=None):
    """u_t(x) by backward characteristics; the exponential weight uses the trapezoid rule."""
    pts = np.asarray(x, dtype=np.float64)
    scalar = pts.ndim == 1 and problem.dim > 1 or pts.ndim == 0
    pts = np.atleast_2d(pts.reshape(-1, problem.dim))
    k = problem.grid.index_of(t)
    if k == 0:
        out = problem.u0(pts)
    else:
        back = inverse_flow(problem.b, problem.driver.base, t, pts, threads=threads)
        lags = back.grid.nodes - back.grid.t0
        phys = t - lags
        cvals = np.stack([np.broadcast_to(problem.c(phys[j], back.phi[j]), (len(pts),)) for j in range(len(lags))])
        integral = np.sum(0.5 * np.diff(lags)[:, None] * (cvals[:-1] + cvals[1:]), axis=0)
        out = problem.u0(back.phi[-1]) * np.exp(-integral)
    return float(out[0]) if scalar else out


def eulerian_pairing(problem: TransportProblem, phi: TestFunction, t, spacing=None, order=0, threads=None):
    """u_t paired with phi (order 0), grad phi (1) or hess phi (2) by quadrature of strong_solution."""
    spacing = phi.radius / POINTS_PER_RADIUS if spacing is None else float(spacing)
    pts, cell = box_grid(phi.radius, spacing, problem.dim, center=phi.center)
    u = strong_solution(problem, t, pts, threads=threads)
    if order == 0:
        return float(np.sum(cell * u * phi(pts)))
    if order == 1:
        return np.sum((cell * u)[:, None] * phi.gradient(pts), axis=0)
    return np.sum((cell * u)[:, None, None] * phi.hessian(pts), axis=0)


# weak formulation diagnostics


def _drift_integral(sample, i):
    t = sample.grid.nodes
    out = np.zeros(len(t))
    np.cumsum(0.5 * np.diff(t) * (sample.drift[:-1, i] + sample.drift[1:, i]), out=out[1:])
    return out


def residual_function(sample: WeakSolutionSample, phi: TestFunction) -> TwoParamFunction:
    """R(s, t) = du(phi) - int_s^t u(div(b phi) - c phi) - u_s(grad phi).dX - 1/2 u_s(hess phi):dX dX on all node pairs."""
    i = sample.index_of(phi)
    v = sample.value[:, i]
    g = sample.grad[:, i]
    h = sample.hess[:, i]
    drift = _drift_integral(sample, i)
    x = sample.problem.driver.base.values
    dx = x[None, :, :] - x[:, None, :]
    res = (
        (v[None, :] - v[:, None])
        - (drift[None, :] - drift[:, None])
        - np.einsum("ia,ija->ij", g, dx)
        - 0.5 * np.einsum("iab,ija,ijb->ij", h, dx, dx)
    )
    return TwoParamFunction(sample.grid, res, atol=np.inf)


def gubinelli_norm(sample: WeakSolutionSample, phi: TestFunction, gamma=None):
    """2 gamma norm of du(grad phi) - u(hess phi) dX, the remainder of u(grad phi) as a controlled path."""
    i = sample.index_of(phi)
    gamma = sample.problem.gamma if gamma is None else gamma
    d = sample.problem.dim
    n = sample.grid.n_points
    return kernels.remainder_max(
        sample.grad[:, i], sample.hess[:, i].reshape(n, d * d), sample.problem.driver.base.values,
        sample.grid.nodes, 2 * gamma, _window(None), False,
    )[0]


def weak_residual(problem: TransportProblem, phi: TestFunction, s, t, sample=None, spacing=None):
    """Residual of the second-order weak expansion on [s, t] and the Gubinelli-derivative check."""
    if s > t:
        raise ValueError(f"need s <= t, got ({s}, {t})")
    if sample is None:
        sample = sample_weak_solution(problem, [phi], spacing=spacing)
    res = residual_function(sample, phi)
    return {"residual": float(res(s, t)), "gubinelli_check": gubinelli_norm(sample, phi)}


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    lags: np.ndarray
    maxima: np.ndarray


def fit_loglog(lags, values):
    lags = np.asarray(lags, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = values > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive values for a log-log fit")
    slope, intercept = np.polyfit(np.log(lags[keep]), np.log(values[keep]), 1)
    return float(slope), float(intercept)


def residual_slope(sample: WeakSolutionSample, phi: TestFunction, min_steps=4, max_fraction=0.25,
                   statistic="max"):
    """Least-squares slope of log S(lag) against log lag over dyadic lags in [min_steps h, max_fraction T].

    S(lag) is the max (or mean) over s of |R(s, s + lag)|.
    """
    if statistic not in ("max", "mean"):
        raise ValueError("statistic must be 'max' or 'mean'")
    reduce = np.max if statistic == "max" else np.mean
    res = np.abs(residual_function(sample, phi).values)
    grid = sample.grid
    n = grid.n_points
    lags, maxima = [], []
    steps = min_steps
    while steps * grid.step <= max_fraction * grid.horizon * (1 + 1e-12) and steps < n:
        i = np.arange(0, n - steps)
        lags.append(steps * grid.step)
        maxima.append(float(reduce(res[i, i + steps])))
        steps *= 2
    slope, intercept = fit_loglog(lags, maxima)
    return SlopeFit(slope, intercept, np.array(lags), np.array(maxima))


def rough_pairing_integral(sample: WeakSolutionSample, phi: TestFunction, rp: RoughPath, t):
    """int_0^t u_s(grad phi) dX_s as a compensated sum with Gubinelli derivative u_s(hess phi)."""
    i = sample.index_of(phi)
    n, d = sample.grid.n_points, sample.problem.dim
    cp = ControlledPath.from_arrays(sample.grid, sample.grad[:, i], sample.hess[:, i].reshape(n, d * d), rp.gamma)
    return float(rough_integral(cp, rp, sample.grid.t0, t))


def weak_identity_defect(sample: WeakSolutionSample, phi: TestFunction, rp: RoughPath | None = None):
    """max_t |u_t(phi) - u_0(phi) - int_0^t u(div(b phi) - c phi) - int_0^t u(grad phi) dX|."""
    rp = sample.problem.driver if rp is None else rp
    i = sample.index_of(phi)
    drift = _drift_integral(sample, i)
    n, d = sample.grid.n_points, sample.problem.dim
    cp = ControlledPath.from_arrays(sample.grid, sample.grad[:, i], sample.hess[:, i].reshape(n, d * d), rp.gamma)
    rough = integral_path(cp, rp).value.values[:, 0]
    defect = sample.value[:, i] - sample.value[0, i] - drift - rough
    return float(np.max(np.abs(defect)))


# duality


def _dual_terminal(b_tilde: VectorField, c_tilde, base: SampledPath, t0_index, starts):
    """Forward b_tilde flows from every start time q <= t0 to t0.

    ``starts`` has shape (Q, P, d) with Q = t0_index + 1 and row q holding
    the positions at time t_q.  Returns, at t0, the positions, DPhi, the
    accumulated weight G = int_q^t0 (div b_tilde - c_tilde) and its gradient.
    All rows march together; row q joins at step q.
    """
    q_count, npts, d = starts.shape
    t = base.times
    xv = base.values
    theta = starts - xv[: q_count, None, :]
    jac = np.broadcast_to(np.eye(d), (q_count, npts, d, d)).copy()
    weight = np.zeros((q_count, npts))
    grad_w = np.zeros((q_count, npts, d))
    c_const = 0.0 if c_tilde is None else float(c_tilde.value)

    def rhs(r, th, jc, x_at):
        value, jacobian, div, grad_div = b_tilde.eval_all(r, th + x_at)
        return (
            value,
            np.einsum("...ab,...bc->...ac", jacobian, jc),
            div - c_const,
            np.einsum("...a,...ac->...c", grad_div, jc),
        )

    for k in range(t0_index):
        a = slice(0, k + 1)
        h = t[k + 1] - t[k]
        xa, xb = xv[k], xv[k + 1]
        xm = 0.5 * (xa + xb)
        th, jc = theta[a], jac[a]
        k1 = rhs(t[k], th, jc, xa)
        k2 = rhs(t[k] + 0.5 * h, th + 0.5 * h * k1[0], jc + 0.5 * h * k1[1], xm)
        k3 = rhs(t[k] + 0.5 * h, th + 0.5 * h * k2[0], jc + 0.5 * h * k2[1], xm)
        k4 = rhs(t[k + 1], th + h * k3[0], jc + h * k3[1], xb)
        theta[a] = th + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        jac[a] = jc + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        weight[a] += (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        grad_w[a] += (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    return theta + xv[t0_index], jac, weight, grad_w


def _check_c_tilde(c_tilde):
    if c_tilde is not None and not isinstance(c_tilde, ConstantScalar):
        raise ValueError("c_tilde must be a constant coefficient")


def backward_dual_solution(b_tilde: VectorField, driver: SampledPath, phi0: TestFunction, t0, t, x,
                           c_tilde=None, with_gradient=False):
    """psi_t(x) = phi0(Phi_{t -> t0}(x)) exp(int_t^t0 (div b_tilde - c_tilde)(Phi_{t -> r}(x)) dr)."""
    _check_c_tilde(c_tilde)
    grid = driver.grid
    i0, it = grid.index_of(t0), grid.index_of(t)
    if it > i0:
        raise ValueError("need t <= t0")
    pts = np.asarray(x, dtype=np.float64).reshape(-1, b_tilde.dim)
    # shift the grid so that the single row starts at index 0
    sub = SampledPath(grid.subgrid(i0 - it), driver.values[it: i0 + 1]) if it < i0 else None
    if sub is None:
        psi, grad = phi0(pts), phi0.gradient(pts)
    else:
        shifted = _ShiftedField(b_tilde, grid.nodes[it] - grid.t0)
        end, jac, weight, gw = _dual_terminal(shifted, c_tilde, sub, i0 - it, pts[None])
        ew = np.exp(weight[0])
        psi = phi0(end[0]) * ew
        grad = ew[:, None] * (np.einsum("pab,pa->pb", jac[0], phi0.gradient(end[0])) + phi0(end[0])[:, None] * gw[0])
    if with_gradient:
        return psi, grad
    return psi


class _ShiftedField(VectorField):
    """b(t + offset, x), used to restart a time-dependent field on a shifted grid."""

    def __init__(self, base, offset):
        self.base = base
        self.offset = offset
        self.dim = base.dim

    def eval(self, t, x):
        return self.base.eval(t + self.offset, x)

    def eval_all(self, t, x):
        return self.base.eval_all(t + self.offset, x)

    def jacobian(self, t, x):
        return self.base.jacobian(t + self.offset, x)

    def divergence(self, t, x):
        return self.base.divergence(t + self.offset, x)

    def grad_divergence(self, t, x):
        return self.base.grad_divergence(t + self.offset, x)


def _duality_ball(problem, b_tilde, phi0, i0):
    """Ball around phi0's center holding every initial point y with Phi_q(y) in supp psi_q.

    Uses |Phi_q(y) - y| <= q |b|_inf + |X_q - X_0| and the analogous bound
    for the b_tilde flow from q to t0, with the sampled driver increments.
    """
    x = problem.driver.base.values[: i0 + 1]
    t = problem.grid.nodes
    travel = np.linalg.norm(x - x[0], axis=1) + np.linalg.norm(x[-1] - x, axis=1)
    drift = (t[i0] - t[0]) * max(problem.b.sup_bound(), b_tilde.sup_bound())
    return phi0.radius + drift + float(np.max(travel))


def duality_identity(problem: TransportProblem, b_tilde: VectorField, phi0: TestFunction, t0,
                     c_tilde=None, spacing=None, radius=None):
    """Both sides of u_t0(phi0) - u_0(psi_0) = int_0^t0 u_q(div[(b - b_tilde) psi_q] - (c - c_tilde) psi_q) dq.

    With u0 = 0 on the support of psi_0 this is the decomposition of u_t0(phi0).
    """
    _check_c_tilde(c_tilde)
    base = problem.driver.base
    i0 = problem.grid.index_of(t0)
    d = problem.dim
    spacing = phi0.radius / POINTS_PER_RADIUS if spacing is None else float(spacing)
    required = _duality_ball(problem, b_tilde, phi0, i0)
    if radius is None:
        if not np.isfinite(required):
            raise ValueError("unbounded drift: pass an explicit spatial radius")
        radius = required
    elif np.isfinite(required) and radius < required * (1 - 1e-12):
        raise DomainTooSmallError(required, radius)
    ypts, cell = box_grid(radius, spacing, d, center=phi0.center)
    ypts = ypts[np.linalg.norm(ypts - phi0.center, axis=1) <= radius]

    # forward characteristics of b with Lagrangian weights up to t0
    states = list(_forward_states(problem, ypts, cell, stop_index=i0))
    x_all = np.stack([st[1] for st in states])
    w_all = np.stack([st[2] for st in states])

    end, jac, weight, gw = _dual_terminal(b_tilde, c_tilde, base, i0, x_all)
    ew = np.exp(weight)
    f_end = phi0(end)
    psi = f_end * ew
    grad_psi = ew[..., None] * (np.einsum("qpab,qpa->qpb", jac, phi0.gradient(end)) + f_end[..., None] * gw)

    t = problem.grid.nodes[: i0 + 1]
    c_t = 0.0 if c_tilde is None else c_tilde.value
    integrand = np.empty(i0 + 1)
    for q in range(i0 + 1):
        x = x_all[q]
        diff_val = problem.b.eval(t[q], x) - b_tilde.eval(t[q], x)
        diff_div = problem.b.divergence(t[q], x) - b_tilde.divergence(t[q], x)
        c_gap = np.broadcast_to(problem.c(t[q], x), psi[q].shape) - c_t
        integrand[q] = np.sum(
            w_all[q] * ((diff_div - c_gap) * psi[q] + np.einsum("pa,pa->p", diff_val, grad_psi[q]))
        )
    integral = float(np.sum(0.5 * np.diff(t) * (integrand[:-1] + integrand[1:])))
    u_t0_phi0 = float(np.sum(w_all[i0] * phi0(x_all[i0])))
    u0_psi0 = float(np.sum(w_all[0] * psi[0]))
    return {
        "u_t0_phi0": u_t0_phi0,
        "u0_psi0": u0_psi0,
        "lhs": u_t0_phi0 - u0_psi0,
        "integral": integral,
        "integrand": integrand,
    }


def duality_bound(problem: TransportProblem, b_tilde: VectorField, phi0: TestFunction, t0,
                  c_tilde=None, spacing=None, identity=True):
    """lhs = |u_t0(phi0) - u_0(psi_0)|, and the mismatch bound

    rhs = |u|_inf sup_q int_B [|div(b - b~)| + |b - b~|](q, x) (|DPhi~_{q -> t0}(x)| + |grad G~_q(x)|) dx

    over the ball B around phi0 containing the supports of every psi_q.
    """
    _check_c_tilde(c_tilde)
    base = problem.driver.base
    i0 = problem.grid.index_of(t0)
    t = problem.grid.nodes[: i0 + 1]
    incr = np.max(np.linalg.norm(base.values[i0] - base.values[: i0 + 1], axis=1))
    r_tilde = phi0.radius + (t[-1] - t[0]) * b_tilde.sup_bound() + incr
    if not np.isfinite(r_tilde):
        raise ValueError("b_tilde must be bounded")
    spacing = phi0.radius / POINTS_PER_RADIUS if spacing is None else float(spacing)
    pts, cell = box_grid(r_tilde, spacing, problem.dim, center=phi0.center)
    pts = pts[np.linalg.norm(pts - phi0.center, axis=1) <= r_tilde]
    starts = np.broadcast_to(pts, (i0 + 1,) + pts.shape).copy()
    _, jac, _, gw = _dual_terminal(b_tilde, c_tilde, base, i0, starts)
    sens = np.linalg.norm(jac.reshape(i0 + 1, len(pts), -1), axis=2) + np.linalg.norm(gw, axis=2)
    sup = 0.0
    for q in range(i0 + 1):
        mismatch = (
            np.abs(problem.b.divergence(t[q], pts) - b_tilde.divergence(t[q], pts))
            + np.linalg.norm(problem.b.eval(t[q], pts) - b_tilde.eval(t[q], pts), axis=1)
        )
        sup = max(sup, float(np.sum(cell * mismatch * sens[q])))
    rhs = problem.sup_bound() * sup
    out = {"rhs": rhs, "ball_radius": float(r_tilde)}
    if identity:
        ident = duality_identity(problem, b_tilde, phi0, t0, c_tilde=c_tilde, spacing=spacing)
        out.update(lhs=abs(ident["lhs"]), identity_lhs=ident["lhs"], identity_integral=ident["integral"])
    return out
