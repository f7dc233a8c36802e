"""Characteristic flows of dy = b(t, y) dt + dX_t with additive driver X.

The integrated unknown is theta_t = Phi_t - (X_t - X_{t_start}), which solves
the classical ODE theta' = b(t, theta + X_t - X_{t_start}) and is Lipschitz in
time whatever the regularity of X.  X is linearly interpolated at Runge-Kutta
stage times; this is the only place the driver's roughness meets the
integrator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FlowBlowUpError
from .fields import VectorField, lin_norm
from .grid import SampledPath, TimeGrid, holder_seminorm, holder_seminorm_values
from .parallel import chunk_slices, ordered_map

BLOWUP_THRESHOLD = 1e8
POINT_CHUNK = 256


@dataclass
class FlowField:
    """Trajectories ``phi[k, p]`` at grid index k for initial point p.

    For a backward (inverse) flow the grid is the lag grid [0, t0] and
    ``phi[k]`` is the state at physical time t0 - t_k.
    """

    x0s: np.ndarray
    grid: TimeGrid
    phi: np.ndarray
    driver: SampledPath
    field: VectorField
    dphi: np.ndarray | None = None
    backward: bool = False

    @property
    def dim(self):
        return self.x0s.shape[1]

    def trajectory(self, p) -> SampledPath:
        return SampledPath(self.grid, self.phi[:, p, :])

    def final(self):
        return self.phi[-1]

    def to_csv(self, path):
        d = self.dim
        header = ["x0_index", "t"] + [f"phi_{a + 1}" for a in range(d)]
        if self.dphi is not None:
            header += [f"dphi_{a + 1}{b + 1}" for a in range(d) for b in range(d)]
        t = self.grid.nodes
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for p in range(self.phi.shape[1]):
                for k in range(len(t)):
                    row = [p, format(float(t[k]), ".17g")]
                    row += [format(float(v), ".17g") for v in self.phi[k, p]]
                    if self.dphi is not None:
                        row += [format(float(v), ".17g") for v in self.dphi[k, p].ravel()]
                    w.writerow(row)


def march(field, times, xvals, start, with_derivative=False, method="rk4", substeps=1):
    """Yield ``(k, phi_k, dphi_k)`` node by node while marching theta along ``times``.

    ``times`` may be increasing or decreasing; ``xvals`` are the driver values
    at ``times`` shifted to vanish at times[0].  ``dphi_k`` is None unless
    ``with_derivative``.
    """
    n = len(times)
    npts, d = start.shape
    jac = np.broadcast_to(np.eye(d), (npts, d, d)).copy() if with_derivative else None
    theta = start.copy()
    yield 0, start.copy(), (jac.copy() if with_derivative else None)
    frac = np.arange(substeps + 1) / substeps
    for k in range(n - 1):
        t_a, t_b = times[k], times[k + 1]
        x_a, x_b = xvals[k], xvals[k + 1]
        h = (t_b - t_a) / substeps
        for m in range(substeps):
            ta = t_a + (t_b - t_a) * frac[m]
            xa = x_a + (x_b - x_a) * frac[m]
            xm = x_a + (x_b - x_a) * (0.5 * (frac[m] + frac[m + 1]))
            xb = x_a + (x_b - x_a) * frac[m + 1]
            if method == "euler":
                if with_derivative:
                    jac = jac + h * np.einsum("pab,pbc->pac", field.jacobian(ta, theta + xa), jac)
                theta = theta + h * field.eval(ta, theta + xa)
                continue
            tm, tb = ta + 0.5 * h, ta + h
            y1 = theta + xa
            k1 = field.eval(ta, y1)
            y2 = theta + 0.5 * h * k1 + xm
            k2 = field.eval(tm, y2)
            y3 = theta + 0.5 * h * k2 + xm
            k3 = field.eval(tm, y3)
            y4 = theta + h * k3 + xb
            k4 = field.eval(tb, y4)
            if with_derivative:
                j1 = np.einsum("pab,pbc->pac", field.jacobian(ta, y1), jac)
                j2 = np.einsum("pab,pbc->pac", field.jacobian(tm, y2), jac + 0.5 * h * j1)
                j3 = np.einsum("pab,pbc->pac", field.jacobian(tm, y3), jac + 0.5 * h * j2)
                j4 = np.einsum("pab,pbc->pac", field.jacobian(tb, y4), jac + h * j3)
                jac = jac + (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
            theta = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        mag = np.max(np.abs(theta), axis=1)
        bad = ~(mag <= BLOWUP_THRESHOLD)
        if bad.any():
            p = int(np.argmax(bad))
            raise FlowBlowUpError(float(t_b), p, float(mag[p]), BLOWUP_THRESHOLD)
        yield k + 1, theta + x_b, (jac.copy() if with_derivative else None)


def _integrate(field, times, xvals, start, with_derivative, method, substeps):
    n = len(times)
    npts, d = start.shape
    phi = np.empty((n, npts, d))
    dphi = np.empty((n, npts, d, d)) if with_derivative else None
    for k, phi_k, jac_k in march(field, times, xvals, start, with_derivative, method, substeps):
        phi[k] = phi_k
        if with_derivative:
            dphi[k] = jac_k
    return phi, dphi


def _check_method(method, substeps):
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown integrator {method!r}")
    if int(substeps) != substeps or substeps < 1:
        raise ValueError("substeps must be a positive integer")
    return int(substeps)


def _run_chunks(field, times, xvals, starts, with_derivative, method, substeps, threads):
    chunks = chunk_slices(len(starts), POINT_CHUNK)
    results = ordered_map(
        lambda sl: _integrate(field, times, xvals, starts[sl], with_derivative, method, substeps),
        chunks,
        threads,
    )
    phi = np.concatenate([r[0] for r in results], axis=1)
    dphi = np.concatenate([r[1] for r in results], axis=1) if with_derivative else None
    return phi, dphi


def _as_points(x0s, dim):
    pts = np.asarray(x0s, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None] if dim == 1 else pts[None, :]
    if pts.shape[1] != dim:
        raise ValueError(f"points must be {dim}-dimensional, got shape {pts.shape}")
    return pts


def solve_flow(b: VectorField, driver: SampledPath, x0s, with_derivative=False,
               method="rk4", substeps=1, threads=None) -> FlowField:
    """Phi_t(x) = x + int_{t0}^t b(r, Phi_r(x)) dr + X_t - X_{t0} on the driver's grid."""
    substeps = _check_method(method, substeps)
    if b.dim != driver.dim:
        raise ValueError(f"field dimension {b.dim} does not match driver dimension {driver.dim}")
    starts = _as_points(x0s, b.dim)
    xvals = driver.values - driver.values[0]
    phi, dphi = _run_chunks(b, driver.times, xvals, starts, with_derivative, method, substeps, threads)
    return FlowField(starts, driver.grid, phi, driver, b, dphi)


def inverse_flow(b: VectorField, driver: SampledPath, t0, points, with_derivative=False,
                 method="rk4", substeps=1, threads=None) -> FlowField:
    """Backward characteristics from time ``t0``: ``phi[k]`` is the state at t0 - t_k.

    The last entry is the inverse flow map Phi_{t0}^{-1}(points).
    """
    substeps = _check_method(method, substeps)
    stop = driver.grid.index_of(t0)
    if stop == 0:
        raise ValueError("t0 must lie after the start of the driver grid")
    starts = _as_points(points, b.dim)
    times = driver.times[stop::-1]
    xvals = driver.values[stop::-1] - driver.values[stop]
    phi, dphi = _run_chunks(b, times, xvals, starts, with_derivative, method, substeps, threads)
    return FlowField(starts, driver.grid.subgrid(stop), phi, driver, b, dphi, backward=True)


def _physical_times(ff: FlowField):
    if ff.backward:
        return ff.grid.t0 + ff.grid.t1 - ff.grid.nodes
    return ff.grid.nodes


def variational_derivative(ff: FlowField, recompute=False):
    """DPhi along each trajectory.

    Flows solved with ``with_derivative`` carry DPhi integrated jointly with
    the trajectory.  Otherwise (or with ``recompute``) the linear variational
    ODE is integrated by RK4 with the stored trajectory interpolated linearly
    at the half-steps.
    """
    if ff.dphi is not None and not recompute:
        return ff.dphi
    t = _physical_times(ff)
    n, npts, d = ff.phi.shape
    out = np.empty((n, npts, d, d))
    jac = np.broadcast_to(np.eye(d), (npts, d, d)).copy()
    out[0] = jac
    b = ff.field
    for k in range(n - 1):
        h = t[k + 1] - t[k]
        tm = t[k] + 0.5 * h
        a0 = b.jacobian(t[k], ff.phi[k])
        am = b.jacobian(tm, 0.5 * (ff.phi[k] + ff.phi[k + 1]))
        a1 = b.jacobian(t[k + 1], ff.phi[k + 1])
        j1 = np.einsum("pab,pbc->pac", a0, jac)
        j2 = np.einsum("pab,pbc->pac", am, jac + 0.5 * h * j1)
        j3 = np.einsum("pab,pbc->pac", am, jac + 0.5 * h * j2)
        j4 = np.einsum("pab,pbc->pac", a1, jac + h * j3)
        jac = jac + (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
        out[k + 1] = jac
    return out


@dataclass
class JacobianPaths:
    exp_formula: np.ndarray
    determinant: np.ndarray

    def max_relative_gap(self):
        return float(np.max(np.abs(self.exp_formula - self.determinant) / np.abs(self.determinant)))


def jacobian_determinant(ff: FlowField, point_index=0) -> JacobianPaths:
    """exp(int_0^t div b(Phi_r(x)) dr) by the trapezoid rule, alongside det DPhi_t(x)."""
    t = _physical_times(ff)
    traj = ff.phi[:, point_index, :]
    div = np.array([ff.field.divergence(t[k], traj[k]) for k in range(len(t))], dtype=np.float64)
    h = np.diff(t)
    integral = np.zeros(len(t))
    np.cumsum(0.5 * h * (div[:-1] + div[1:]), out=integral[1:])
    dphi = variational_derivative(ff)[:, point_index]
    return JacobianPaths(np.exp(integral), np.linalg.det(dphi))


def growth_function(x):
    """g(x) = ((x^2 + x) e^x + x + 1) e^x."""
    ex = np.exp(x)
    return ((x * x + x) * ex + x + 1.0) * ex


def apriori_holder_check(ff: FlowField, gamma):
    """Compare the grid Hölder seminorm of every trajectory against K (1 + |x|)(1 + [X]_gamma)."""
    horizon = ff.grid.horizon
    k_t = max(1.0, horizon ** (1.0 - gamma))
    k_total = k_t * growth_function(horizon * lin_norm(ff.field))
    x_norm = holder_seminorm(ff.driver, gamma)
    lhs = np.array([holder_seminorm_values(ff.phi[:, p], ff.grid.nodes, gamma) for p in range(ff.phi.shape[1])])
    bound = k_total * (1.0 + np.linalg.norm(ff.x0s, axis=1)) * (1.0 + x_norm)
    return {
        "lhs": lhs.tolist(),
        "bound": bound.tolist(),
        "ratio": (lhs / bound).tolist(),
        "constant": float(k_total),
        "pass": bool(np.all(lhs <= bound)),
    }


def flow_compare(b: VectorField, driver_x: SampledPath, driver_y: SampledPath, points, gamma,
                 with_derivative=False, threads=None):
    """Sup over points of [Phi^X(x) - Phi^Y(x)]_gamma and, optionally, the Lipschitz-in-time
    seminorm of DPhi^X - DPhi^Y."""
    fx = solve_flow(b, driver_x, points, with_derivative=with_derivative, threads=threads)
    fy = solve_flow(b, driver_y, points, with_derivative=with_derivative, threads=threads)
    nodes = driver_x.grid.nodes
    diff = fx.phi - fy.phi
    out = {
        "difference_norm": max(holder_seminorm_values(diff[:, p], nodes, gamma) for p in range(diff.shape[1])),
        "driver_distance": holder_seminorm(driver_x - driver_y, gamma),
    }
    if with_derivative:
        dd = (fx.dphi - fy.dphi).reshape(len(nodes), diff.shape[1], -1)
        out["dphi_difference"] = max(holder_seminorm_values(dd[:, p], nodes, 1.0) for p in range(dd.shape[1]))
    return out


def derivative_sup(ff: FlowField):
    """sup_t sup_x |DPhi_t(x)| (spectral norm)."""
    dphi = variational_derivative(ff)
    return float(np.max(np.linalg.norm(dphi, ord=2, axis=(-2, -1))))


def averaging_derivative_sup(ff: FlowField, f: VectorField):
    """sup_t sup_x |D F_t(x)| for F_t(x) = int_0^t f(Phi_q(x)) dq, via int Df(Phi_q) DPhi_q dq."""
    t = _physical_times(ff)
    dphi = variational_derivative(ff)
    integrand = np.stack(
        [np.einsum("pab,pbc->pac", f.jacobian(t[k], ff.phi[k]), dphi[k]) for k in range(len(t))]
    )
    h = np.diff(t)[:, None, None, None]
    acc = np.zeros_like(integrand)
    np.cumsum(0.5 * h * (integrand[:-1] + integrand[1:]), axis=0, out=acc[1:])
    return float(np.max(np.linalg.norm(acc, ord=2, axis=(-2, -1))))


def regularization_profile(fields, driver: SampledPath, points, f: VectorField | None = None,
                           substeps=1, threads=None):
    """For each field in ``fields`` (typically mollifications of one drift), the sup of
    |DPhi| and, if ``f`` is given, of |DF| along the flow driven by ``driver``."""
    rows = []
    for b in fields:
        ff = solve_flow(b, driver, points, with_derivative=True, substeps=substeps, threads=threads)
        row = {"dphi_sup": derivative_sup(ff)}
        if f is not None:
            row["averaging_sup"] = averaging_derivative_sup(ff, f)
        rows.append(row)
    return rows
