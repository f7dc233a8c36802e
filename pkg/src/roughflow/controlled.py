"""Controlled paths, their products and the compensated-Riemann-sum integral.

A controlled path y with values in R^m is stored as its values (n, m) and its
Gubinelli derivative (n, m*d), row-major in (m, d), relative to a reference
path in R^d.  The remainder y#(s,t) = dy(s,t) - y'(s) dX(s,t) is never stored.

For integration, an integrand with m = p*d components is read as a (p, d)
matrix acting on dX; its derivative is then (p, d, d) and the compensator of a
step is sum_{ij} a'^{p,i,j} XX^{j,i}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import EXHAUSTIVE_LIMIT, SampledPath, _check_same_grid, _window, holder_seminorm
from .roughpath import RoughPath


@dataclass(frozen=True)
class ControlledPath:
    value: SampledPath
    gubinelli_derivative: SampledPath
    reference_gamma: float = 0.4

    def __post_init__(self):
        _check_same_grid(self.value, self.gubinelli_derivative)
        if self.gubinelli_derivative.dim % self.value.dim:
            raise ValueError(
                f"derivative dimension {self.gubinelli_derivative.dim} is not a multiple "
                f"of the value dimension {self.value.dim}"
            )

    @classmethod
    def from_arrays(cls, grid, value, derivative, reference_gamma=0.4):
        value = np.asarray(value, dtype=np.float64).reshape(grid.n_points, -1)
        derivative = np.asarray(derivative, dtype=np.float64).reshape(grid.n_points, -1)
        return cls(SampledPath(grid, value), SampledPath(grid, derivative), reference_gamma)

    @property
    def grid(self):
        return self.value.grid

    @property
    def ref_dim(self):
        return self.gubinelli_derivative.dim // self.value.dim

    def derivative_matrix(self):
        n, m = self.value.values.shape
        return self.gubinelli_derivative.values.reshape(n, m, self.ref_dim)


def _check_reference(cp: ControlledPath, x: SampledPath):
    _check_same_grid(cp.value, x)
    if cp.ref_dim != x.dim:
        raise ValueError(f"derivative expects a reference of dimension {cp.ref_dim}, got {x.dim}")


def remainder(cp: ControlledPath, x: SampledPath, s, t):
    """y(t) - y(s) - y'(s) (X(t) - X(s))."""
    _check_reference(cp, x)
    g = cp.grid
    i, j = g.index_of(s), g.index_of(t)
    y = cp.value.values
    return y[j] - y[i] - cp.derivative_matrix()[i] @ (x.values[j] - x.values[i])


def remainder_norm(cp: ControlledPath, x: SampledPath, gamma=None, window=None):
    """Grid 2*gamma norm of the remainder."""
    _check_reference(cp, x)
    gamma = cp.reference_gamma if gamma is None else gamma
    dyadic = cp.grid.n_points > EXHAUSTIVE_LIMIT
    return kernels.remainder_max(
        cp.value.values, cp.gubinelli_derivative.values, x.values, cp.grid.nodes,
        2 * gamma, _window(window), dyadic,
    )[0]


def controlled_norm(cp: ControlledPath, x: SampledPath, gamma=None, include_initial=False):
    """||y||_gamma + ||y'||_gamma + ||y#||_{2 gamma} (grid seminorms).

    With ``include_initial`` the values |y_0| + |y'_0| are added, giving the
    inhomogeneous norm under which products are bounded.
    """
    gamma = cp.reference_gamma if gamma is None else gamma
    total = (
        holder_seminorm(cp.value, gamma)
        + holder_seminorm(cp.gubinelli_derivative, gamma)
        + remainder_norm(cp, x, gamma)
    )
    if include_initial:
        total += float(np.linalg.norm(cp.value.values[0]))
        total += float(np.linalg.norm(cp.gubinelli_derivative.values[0]))
    return total


def controlled_product(a: ControlledPath, b: ControlledPath, x: SampledPath) -> ControlledPath:
    """Componentwise product with the Leibniz derivative a' b + a b'."""
    _check_reference(a, x)
    _check_reference(b, x)
    if a.value.dim != b.value.dim:
        raise ValueError(f"shape mismatch: {a.value.dim} vs {b.value.dim} components")
    av, bv = a.value.values, b.value.values
    ad, bd = a.derivative_matrix(), b.derivative_matrix()
    deriv = ad * bv[:, :, None] + av[:, :, None] * bd
    gamma = min(a.reference_gamma, b.reference_gamma)
    return ControlledPath.from_arrays(a.grid, av * bv, deriv, gamma)


def _step_terms(a: ControlledPath, rp: RoughPath):
    """Per-step compensated increments a_k dX_k + a'_k XX_k, shape (n-1, p)."""
    _check_same_grid(a.value, rp.base)
    d = rp.dim
    n, m = a.value.values.shape
    if m % d or a.ref_dim != d:
        raise ValueError(f"integrand with {m} components cannot act on a {d}-dimensional path")
    p = m // d
    av = a.value.values.reshape(n, p, d)
    ad = a.gubinelli_derivative.values.reshape(n, p, d, d)
    dx = np.diff(rp.base.values, axis=0)
    if rp.has_dense:
        dense = rp.dense_area()
        k = np.arange(n - 1)
        xx = dense[k, k + 1]
    else:
        xx = rp.adjacent
    first = np.einsum("kpi,ki->kp", av[:-1], dx)
    second = np.einsum("kpij,kji->kp", ad[:-1], xx)
    return first + second


def rough_integral(a: ControlledPath, rp: RoughPath, s, t):
    """Compensated Riemann sum of a against the rough path over the grid steps in [s, t]."""
    g = a.grid
    i, j = g.index_of(s), g.index_of(t)
    if i > j:
        raise ValueError(f"need s <= t, got ({s}, {t})")
    terms = _step_terms(a, rp)
    out = terms[i:j].sum(axis=0)
    return out[0] if out.shape == (1,) else out


def integral_path(a: ControlledPath, rp: RoughPath) -> ControlledPath:
    """t -> int_0^t a dX as a controlled path whose derivative is a itself."""
    terms = _step_terms(a, rp)
    n = a.grid.n_points
    values = np.zeros((n, terms.shape[1]))
    np.cumsum(terms, axis=0, out=values[1:])
    return ControlledPath.from_arrays(a.grid, values, a.value.values, a.reference_gamma)


def local_seminorm(cp: ControlledPath, x: SampledPath, eps, gamma=None):
    """Sup over pairs with |t - s| <= eps of |dy|/|t-s|^g + |dy'|/|t-s|^g + |y#|/|t-s|^(2g)."""
    _check_reference(cp, x)
    gamma = cp.reference_gamma if gamma is None else gamma
    return kernels.local_controlled_max(
        cp.value.values, cp.gubinelli_derivative.values, x.values, cp.grid.nodes,
        gamma, _window(eps),
    )[0]


def local_bound_estimate(cp: ControlledPath, x: SampledPath, eps, gamma=None):
    """Global bound (T/eps)^(1-g) [a]_eps (1 + ||X||_g) + |a_0| + |a'_0| from local data."""
    gamma = cp.reference_gamma if gamma is None else gamma
    if eps <= 0:
        raise ValueError("eps must be positive")
    horizon = cp.grid.horizon
    local = local_seminorm(cp, x, eps, gamma)
    xnorm = holder_seminorm(x, gamma)
    return (
        (horizon / min(eps, horizon)) ** (1 - gamma) * local * (1 + xnorm)
        + float(np.linalg.norm(cp.value.values[0]))
        + float(np.linalg.norm(cp.gubinelli_derivative.values[0]))
    )
