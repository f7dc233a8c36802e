"""Time grids, sampled paths and Hölder-type norm estimators.

All norms are grid estimates of continuum suprema: for genuinely rough paths
they are lower bounds.  On grids with more than ``EXHAUSTIVE_LIMIT`` nodes the
pair scans are restricted to pairs ``(i, i + 2**m)``, which is again a lower
bound of the full-grid value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels

EXHAUSTIVE_LIMIT = 4097


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = t0 + i (t1 - t0) / (n_points - 1)``.

    Dyadic sizes ``n_points = 2**k + 1`` are recommended so that grids nest
    under halving of the step.
    """

    t0: float
    t1: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)) or self.t1 <= self.t0:
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def dyadic(cls, level, t0=0.0, t1=1.0):
        return cls(t0, t1, 2 ** level + 1)

    @cached_property
    def nodes(self):
        nodes = self.t0 + (self.t1 - self.t0) * np.arange(self.n_points) / (self.n_points - 1)
        nodes[-1] = self.t1
        nodes.setflags(write=False)
        return nodes

    @property
    def step(self):
        return (self.t1 - self.t0) / (self.n_points - 1)

    @property
    def horizon(self):
        return self.t1 - self.t0

    def index_of(self, t):
        """Index of the node equal to ``t`` (to 1e-9 relative to the step)."""
        k = int(round((t - self.t0) / self.step))
        if k < 0 or k >= self.n_points or abs(self.nodes[k] - t) > 1e-9 * self.step:
            raise ValueError(f"t={t} is not a node of {self}")
        return k

    def refine(self, factor):
        return TimeGrid(self.t0, self.t1, (self.n_points - 1) * factor + 1)

    def subgrid(self, stop_index):
        """The grid of nodes ``0..stop_index``."""
        return TimeGrid(self.t0, float(self.nodes[stop_index]), stop_index + 1)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class SampledPath:
    """A path in R^d sampled on a ``TimeGrid``; ``values`` has shape (n_points, d)."""

    def __init__(self, grid: TimeGrid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != grid.n_points:
            raise ValueError(
                f"values must have shape ({grid.n_points}, d), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        self.grid = grid
        self.values = _frozen(values)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def times(self):
        return self.grid.nodes

    def __len__(self):
        return self.grid.n_points

    def __repr__(self):
        return f"SampledPath(n_points={self.grid.n_points}, dim={self.dim})"

    def increment(self, s, t):
        return self.values[self.grid.index_of(t)] - self.values[self.grid.index_of(s)]

    def at(self, t):
        """Piecewise-linear interpolation at time(s) ``t``; returns (..., d)."""
        t = np.asarray(t, dtype=np.float64)
        out = np.stack([np.interp(t, self.times, self.values[:, c]) for c in range(self.dim)], axis=-1)
        return out

    def __sub__(self, other):
        _check_same_grid(self, other)
        return SampledPath(self.grid, self.values - other.values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return SampledPath(self.grid, self.values + other.values)

    def scaled(self, factor):
        return SampledPath(self.grid, self.values * factor)

    def restrict(self, stop_index):
        return SampledPath(self.grid.subgrid(stop_index), self.values[: stop_index + 1])

    def subsample(self, stride):
        """Every ``stride``-th node; ``n_points - 1`` must be divisible by ``stride``."""
        if (self.grid.n_points - 1) % stride:
            raise ValueError(f"stride {stride} does not divide {self.grid.n_points - 1}")
        grid = TimeGrid(self.grid.t0, self.grid.t1, (self.grid.n_points - 1) // stride + 1)
        return SampledPath(grid, self.values[::stride])

    def to_csv(self, path):
        path = Path(path)
        header = ["t"] + [f"x{c + 1}" for c in range(self.dim)]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, row in zip(self.times, self.values):
                w.writerow([format(float(t), ".17g")] + [format(float(v), ".17g") for v in row])

    @classmethod
    def from_csv(cls, path):
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header[0] != "t" or len(header) < 2:
            raise ValueError(f"bad path CSV header {header}")
        data = np.array(body, dtype=np.float64)
        t = data[:, 0]
        grid = TimeGrid(float(t[0]), float(t[-1]), len(t))
        if not np.allclose(t, grid.nodes, rtol=0, atol=1e-12 * max(1.0, abs(grid.t1))):
            raise ValueError("CSV times are not a uniform grid")
        return cls(grid, data[:, 1:])


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


class TwoParamFunction:
    """A function of node pairs (s_i, t_j), stored densely with shape (n, n, *shape).

    Only entries with i <= j are meaningful; diagonal entries must vanish.
    """

    def __init__(self, grid: TimeGrid, values, atol=0.0):
        values = np.asarray(values, dtype=np.float64)
        n = grid.n_points
        if values.ndim < 2 or values.shape[:2] != (n, n):
            raise ValueError(f"values must have leading shape ({n}, {n}), got {values.shape}")
        diag = values[np.arange(n), np.arange(n)]
        if np.max(np.abs(diag), initial=0.0) > atol:
            raise ValueError("two-parameter functions must vanish on the diagonal")
        self.grid = grid
        self.values = _frozen(values)

    @property
    def shape(self):
        return self.values.shape[2:]

    @classmethod
    def from_function(cls, grid, func):
        """Build from ``func(s, t)`` evaluated on all node pairs (vectorized over arrays)."""
        s, t = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
        values = np.asarray(func(s, t), dtype=np.float64)
        return cls(grid, values, atol=1e-14 * np.max(np.abs(values), initial=0.0))

    @classmethod
    def increment_of(cls, path: SampledPath):
        v = path.values
        return cls(path.grid, v[None, :, :] - v[:, None, :])

    def __call__(self, s, t):
        return self.values[self.grid.index_of(s), self.grid.index_of(t)]

    def entry_norms(self):
        flat = self.values.reshape(self.grid.n_points, self.grid.n_points, -1)
        return np.sqrt(np.sum(flat * flat, axis=2))


def _window(window):
    return np.inf if window is None else float(window) * (1 + 1e-12)


def holder_seminorm(f: SampledPath, gamma, window=None):
    """Grid estimate of sup |f(t) - f(s)| / |t - s|^gamma.

    ``window`` restricts the scan to pairs with ``t - s <= window``.
    """
    return holder_seminorm_arg(f, gamma, window)[0]


def holder_seminorm_arg(f: SampledPath, gamma, window=None):
    """Like ``holder_seminorm`` but also returns the maximizing node pair."""
    if not (0 < gamma <= 1):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if f.grid.n_points < 2:
        raise ValueError("need at least two nodes")
    dyadic = f.grid.n_points > EXHAUSTIVE_LIMIT
    val, i, j = kernels.holder_max(f.values, f.times, gamma, _window(window), dyadic)
    return val, i, j


def holder_seminorm_values(values, times, gamma, window=None):
    """``holder_seminorm`` for a raw (n, m) array on the node vector ``times``."""
    values = np.asarray(values, dtype=np.float64).reshape(len(times), -1)
    dyadic = len(times) > EXHAUSTIVE_LIMIT
    return kernels.holder_max(values, times, gamma, _window(window), dyadic)[0]


def two_param_norm(h: TwoParamFunction, nu, window=None):
    """Grid estimate of sup |h(s, t)| / |t - s|^nu over stored pairs s < t."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if h.grid.n_points < 2:
        raise ValueError("no pairs to scan")
    return kernels.two_param_max(h.entry_norms(), h.grid.nodes, nu, _window(window))[0]


def coherence_defect(h: TwoParamFunction, s, u, t):
    """h(s, t) - h(s, u) - h(u, t) for nodes s <= u <= t."""
    if not (s <= u <= t):
        raise ValueError(f"need s <= u <= t, got ({s}, {u}, {t})")
    return h(s, t) - h(s, u) - h(u, t)


def sup_norm(f: SampledPath):
    return float(np.max(np.sqrt(np.sum(f.values ** 2, axis=1))))
