"""Step-2 rough paths over a sampled base path.

The level-2 tensor is stored on adjacent node pairs only.  Values on an
arbitrary pair (i, j) follow from Chen's relation through the prefix sums

    S_j = sum_{k<j} (A_k + X_k (x) dX_k),   XX(i, j) = S_j - S_i - X_i (x) (X_j - X_i),

so the relation holds by construction up to rounding.  A rough path may also
carry a dense level-2 table (used to build deliberately non-Chen objects for
diagnostics); such tables take precedence over the adjacent storage.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import kernels
from .grid import (
    EXHAUSTIVE_LIMIT,
    SampledPath,
    TimeGrid,
    TwoParamFunction,
    _window,
    holder_seminorm,
    two_param_norm,
)

DEFAULT_GAMMA = 0.4


def check_gamma(gamma):
    if not (1.0 / 3.0 < gamma <= 0.5):
        raise ValueError(f"gamma must lie in (1/3, 1/2], got {gamma}")
    return float(gamma)


class RoughPath:
    """A sampled path together with its level-2 iterated integrals."""

    def __init__(self, base: SampledPath, adjacent, gamma=DEFAULT_GAMMA, dense=None):
        n, d = base.values.shape
        adjacent = np.asarray(adjacent, dtype=np.float64).reshape(n - 1, d, d)
        if not np.all(np.isfinite(adjacent)):
            raise ValueError("level-2 values must be finite")
        self.base = base
        self.gamma = check_gamma(gamma)
        self.adjacent = adjacent
        self.adjacent.setflags(write=False)
        x = base.values
        dx = np.diff(x, axis=0)
        steps = adjacent + x[:-1, :, None] * dx[:, None, :]
        prefix = np.zeros((n, d, d))
        np.cumsum(steps, axis=0, out=prefix[1:])
        self._prefix = prefix
        if dense is not None:
            dense = np.asarray(dense, dtype=np.float64).reshape(n, n, d, d)
            dense.setflags(write=False)
        self._dense = dense

    @classmethod
    def from_dense(cls, base: SampledPath, area, gamma=DEFAULT_GAMMA):
        """Rough path whose level-2 values are given on every pair (n, n, d, d)."""
        area = np.asarray(area, dtype=np.float64)
        n = base.grid.n_points
        k = np.arange(n - 1)
        return cls(base, area[k, k + 1], gamma, dense=area)

    @property
    def grid(self) -> TimeGrid:
        return self.base.grid

    @property
    def dim(self):
        return self.base.dim

    @property
    def has_dense(self):
        return self._dense is not None

    def area_index(self, i, j):
        if self._dense is not None:
            return self._dense[i, j].copy()
        x = self.base.values
        return self._prefix[j] - self._prefix[i] - np.outer(x[i], x[j] - x[i])

    def area(self, s, t):
        g = self.grid
        return self.area_index(g.index_of(s), g.index_of(t))

    def dense_area(self):
        """Level-2 values on all node pairs, shape (n, n, d, d)."""
        if self._dense is not None:
            return self._dense
        x = self.base.values
        s = self._prefix
        return s[None, :] - s[:, None] - x[:, None, :, None] * (x[None, :, None, :] - x[:, None, None, :])

    def area_function(self) -> TwoParamFunction:
        return TwoParamFunction(self.grid, self.dense_area(), atol=1e-12)

    def with_adjacent(self, adjacent):
        return RoughPath(self.base, adjacent, self.gamma)

    def to_csv(self, base_path, area_path):
        self.base.to_csv(base_path)
        d = self.dim
        t = self.grid.nodes
        header = ["i", "t_i", "t_i1"] + [f"A{a + 1}{b + 1}" for a in range(d) for b in range(d)]
        with Path(area_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, a in enumerate(self.adjacent):
                w.writerow(
                    [k, format(float(t[k]), ".17g"), format(float(t[k + 1]), ".17g")]
                    + [format(float(v), ".17g") for v in a.ravel()]
                )

    @classmethod
    def from_csv(cls, base_path, area_path, gamma=DEFAULT_GAMMA):
        base = SampledPath.from_csv(base_path)
        with Path(area_path).open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        data = np.array(rows, dtype=np.float64)
        if data.shape[0] != base.grid.n_points - 1:
            raise ValueError("area CSV length does not match the base path")
        return cls(base, data[:, 3:], gamma)


def lift_path(x: SampledPath, refinement=1, gamma=DEFAULT_GAMMA) -> RoughPath:
    """Canonical lift of the piecewise-linear interpolation of ``x``.

    On each grid step the integral of (X_r - X_{t_k}) (x) dX_r is computed by
    the composite trapezoid rule on ``refinement`` sub-steps; the integrand is
    linear on the step, so the value is dX (x) dX / 2 for every refinement.
    """
    if x.grid.n_points < 2:
        raise ValueError("need at least two nodes")
    refinement = int(refinement)
    if refinement < 1:
        raise ValueError("refinement must be a positive integer")
    dx = np.diff(x.values, axis=0)
    u = np.linspace(0.0, 1.0, refinement + 1)
    w = np.full(refinement + 1, 1.0 / refinement)
    w[[0, -1]] *= 0.5
    # integrand at sub-node u is (u dX) (x) dX / h over a step of length h
    quad = float(np.sum(w * u))
    adjacent = quad * dx[:, :, None] * dx[:, None, :]
    return RoughPath(x, adjacent, gamma)


def lift_smooth(path_fn, velocity_fn, grid: TimeGrid, refinement=16, gamma=DEFAULT_GAMMA) -> RoughPath:
    """Natural lift of a C^1 path given by ``path_fn`` and its derivative ``velocity_fn``.

    Both callables map an array of times (m,) to values (m, d).  The adjacent
    iterated integrals use the composite trapezoid rule with ``refinement``
    sub-steps per grid step.
    """
    t = grid.nodes
    base = SampledPath(grid, np.asarray(path_fn(t), dtype=np.float64).reshape(len(t), -1))
    d = base.dim
    u = np.linspace(0.0, 1.0, refinement + 1)
    sub = t[:-1, None] + (t[1:] - t[:-1])[:, None] * u[None, :]
    xs = np.asarray(path_fn(sub.ravel()), dtype=np.float64).reshape(sub.shape + (d,))
    vs = np.asarray(velocity_fn(sub.ravel()), dtype=np.float64).reshape(sub.shape + (d,))
    integrand = (xs - xs[:, :1, :])[:, :, :, None] * vs[:, :, None, :]
    w = np.full(refinement + 1, 1.0 / refinement)
    w[[0, -1]] *= 0.5
    h = np.diff(t)
    adjacent = np.einsum("m,kmab->kab", w, integrand) * h[:, None, None]
    return RoughPath(base, adjacent, gamma)


def chen_defect(rp: RoughPath, s, u, t):
    """XX(s,t) - XX(s,u) - XX(u,t) - dX(s,u) (x) dX(u,t)."""
    if not (s <= u <= t):
        raise ValueError(f"need s <= u <= t, got ({s}, {u}, {t})")
    g = rp.grid
    i, k, j = g.index_of(s), g.index_of(u), g.index_of(t)
    x = rp.base.values
    return (
        rp.area_index(i, j) - rp.area_index(i, k) - rp.area_index(k, j)
        - np.outer(x[k] - x[i], x[j] - x[k])
    )


def max_chen_defect(rp: RoughPath, exhaustive_limit=257, n_samples=20000, seed=0):
    """Largest Frobenius Chen defect: exhaustive for small grids, sampled triples above."""
    n = rp.grid.n_points
    if n <= exhaustive_limit:
        val, *_ = kernels.chen_defect_max(rp.base.values, rp.dense_area())
        return val
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.integers(0, n, size=(n_samples, 3)), axis=1)
    best = 0.0
    for i, k, j in idx:
        x = rp.base.values
        defect = (
            rp.area_index(i, j) - rp.area_index(i, k) - rp.area_index(k, j)
            - np.outer(x[k] - x[i], x[j] - x[k])
        )
        best = max(best, float(np.linalg.norm(defect)))
    return best


def symmetry_defect(rp: RoughPath, s, t):
    """Sym(XX(s,t)) - dX(s,t) (x) dX(s,t) / 2; zero for geometric rough paths."""
    if s > t:
        raise ValueError(f"need s <= t, got ({s}, {t})")
    a = rp.area(s, t)
    dx = rp.base.increment(s, t)
    return 0.5 * (a + a.T) - 0.5 * np.outer(dx, dx)


def max_symmetry_defect(rp: RoughPath):
    area = rp.dense_area()
    x = rp.base.values
    dx = x[None, :, :] - x[:, None, :]
    sym = 0.5 * (area + np.swapaxes(area, 2, 3)) - 0.5 * dx[:, :, :, None] * dx[:, :, None, :]
    iu = np.triu_indices(rp.grid.n_points)
    return float(np.max(np.abs(sym[iu])))


def _area_norm(a: RoughPath, b: RoughPath | None, nu):
    n, d = a.base.values.shape
    dyadic = n > EXHAUSTIVE_LIMIT
    if a.has_dense or (b is not None and b.has_dense):
        diff = a.dense_area() - (b.dense_area() if b is not None else 0.0)
        return two_param_norm(TwoParamFunction(a.grid, diff, atol=np.inf), nu)
    if b is None:
        x2 = np.zeros_like(a.base.values)
        s2 = np.zeros_like(a._prefix)
    else:
        x2, s2 = b.base.values, b._prefix
    return kernels.area_ratio_max(
        a.base.values, a._prefix, x2, s2, a.grid.nodes, nu, _window(None), dyadic
    )[0]


def roughpath_norm(rp: RoughPath, gamma=None):
    """||X||_gamma + ||XX||_{2 gamma} with grid estimators (Hölder seminorm at level 1)."""
    gamma = rp.gamma if gamma is None else gamma
    return holder_seminorm(rp.base, gamma) + _area_norm(rp, None, 2 * gamma)


def roughpath_distance(a: RoughPath, b: RoughPath, gamma=None):
    if a.grid != b.grid or a.dim != b.dim:
        raise ValueError("rough paths must share grid and dimension")
    gamma = a.gamma if gamma is None else gamma
    return holder_seminorm(a.base - b.base, gamma) + _area_norm(a, b, 2 * gamma)
