"""Driving signals: fractional Brownian motion, dyadic approximations and the
rho-irregularity functional of a sampled path."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import FactorizationError
from .grid import SampledPath, TimeGrid
from .parallel import ordered_map
from .roughpath import DEFAULT_GAMMA, RoughPath, check_gamma, lift_path

CHOLESKY_LIMIT = 4097
JITTER = 1e-12


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    dim: int = 1
    horizon: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.hurst < 1.0):
            raise ValueError("hurst must lie in (0,1)")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def grid(self, n_points):
        return TimeGrid(0.0, self.horizon, n_points)


def fbm_covariance(times, hurst):
    """Covariance matrix 0.5 (t^2H + s^2H - |t - s|^2H) on the given times."""
    t = np.asarray(times, dtype=np.float64)
    two_h = 2.0 * hurst
    s, u = np.meshgrid(t, t, indexing="ij")
    return 0.5 * (np.abs(s) ** two_h + np.abs(u) ** two_h - np.abs(s - u) ** two_h)


@lru_cache(maxsize=16)
def _cholesky_factor(hurst, t1, n_points):
    grid = TimeGrid(0.0, t1, n_points)
    cov = fbm_covariance(grid.nodes[1:], hurst)
    cov[np.diag_indices_from(cov)] += JITTER
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise FactorizationError(hurst, n_points) from None
    factor.setflags(write=False)
    return factor


def _check_grid(spec: FbmSpec, grid: TimeGrid):
    if grid.t0 != 0.0:
        raise ValueError(f"fBm grids must start at 0, got t0={grid.t0}")
    if grid.n_points > CHOLESKY_LIMIT:
        raise ValueError(
            f"Cholesky sampling supports at most {CHOLESKY_LIMIT} nodes, got {grid.n_points}"
        )


def _combine(factor, normals):
    # normals: (..., d, n-1); explicit row sums keep the result independent of BLAS threading
    out = np.zeros(normals.shape[:-1] + (factor.shape[0] + 1,))
    for k in range(factor.shape[0]):
        out[..., k + 1] = normals[..., : k + 1] @ factor[k, : k + 1]
    return out


def sample_fbm(spec: FbmSpec, grid: TimeGrid | None = None, n_points=1025) -> SampledPath:
    """One fBm sample with ``spec.dim`` independent components, X_0 = 0."""
    grid = spec.grid(n_points) if grid is None else grid
    _check_grid(spec, grid)
    factor = _cholesky_factor(float(spec.hurst), float(grid.t1), grid.n_points)
    rng = np.random.default_rng(spec.seed)
    normals = rng.standard_normal((spec.dim, grid.n_points - 1))
    return SampledPath(grid, _combine(factor, normals).T)


def sample_fbm_batch(spec: FbmSpec, grid: TimeGrid, n_samples):
    """``n_samples`` independent paths from one generator seeded by ``spec.seed``.

    Returns an array of shape (n_samples, n_points, dim).
    """
    _check_grid(spec, grid)
    factor = _cholesky_factor(float(spec.hurst), float(grid.t1), grid.n_points)
    rng = np.random.default_rng(spec.seed)
    normals = rng.standard_normal((n_samples, spec.dim, grid.n_points - 1))
    return np.swapaxes(_combine(factor, normals), 1, 2)


def lift_fbm(path: SampledPath, gamma=DEFAULT_GAMMA, hurst=None) -> RoughPath:
    """Piecewise-linear lift of an fBm sample.

    This is the lift of the grid interpolant; under refinement it approximates
    the canonical (Stratonovich when hurst = 1/2) lift.
    """
    gamma = check_gamma(gamma)
    if hurst is not None and not gamma < hurst:
        raise ValueError(f"gamma={gamma} must be below the Hurst index {hurst}")
    return lift_path(path, gamma=gamma)


def dyadic_approximation(x: SampledPath, level) -> SampledPath:
    """Interpolate ``x`` through its nodes on the dyadic subgrid with 2**level steps."""
    steps = x.grid.n_points - 1
    level = int(level)
    if level < 0 or 2 ** level > steps or steps % (2 ** level):
        raise ValueError(f"level {level} is incompatible with {steps} grid steps")
    stride = steps // 2 ** level
    t = x.times
    coarse_t = t[::stride]
    coarse = x.values[::stride]
    out = np.stack([np.interp(t, coarse_t, coarse[:, c]) for c in range(x.dim)], axis=1)
    return SampledPath(x.grid, out)


DEFAULT_MAGNITUDES = (1, 2, 4, 8, 16, 32, 64)


def default_xi_grid(dim, magnitudes=DEFAULT_MAGNITUDES, n_random=32, seed=12345):
    """Magnitudes times canonical directions, plus fixed random unit directions when dim >= 2."""
    dirs = list(np.eye(dim))
    if dim >= 2:
        rnd = np.random.default_rng(seed).standard_normal((n_random, dim))
        dirs.extend(rnd / np.linalg.norm(rnd, axis=1, keepdims=True))
    return np.array([m * d for m in magnitudes for d in dirs], dtype=np.float64)


@dataclass(frozen=True)
class IrregularitySpec:
    rho: float
    gamma_w: float = 0.55
    xi_grid: np.ndarray | None = field(default=None, compare=False)
    pair_stride: int = 1

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        if not (0.5 < self.gamma_w <= 1.0):
            raise ValueError(f"gamma_w must lie in (1/2, 1], got {self.gamma_w}")
        if int(self.pair_stride) != self.pair_stride or self.pair_stride < 1:
            raise ValueError(f"pair_stride must be a positive integer, got {self.pair_stride}")
        if self.xi_grid is not None:
            xi = np.atleast_2d(np.asarray(self.xi_grid, dtype=np.float64))
            if xi.size == 0:
                raise ValueError("xi_grid must be non-empty")
            object.__setattr__(self, "xi_grid", xi)

    def frequencies(self, dim):
        if self.xi_grid is None:
            return default_xi_grid(dim)
        xi = self.xi_grid
        if xi.shape[1] != dim:
            xi = xi.reshape(-1, dim)
        return xi


@dataclass
class IrregularityResult:
    value: float
    xi: np.ndarray
    s: float
    t: float
    per_xi: np.ndarray
    magnitudes: np.ndarray

    def max_over(self, lo=0.0, hi=np.inf):
        """Largest per-frequency value with lo <= |xi| <= hi."""
        keep = (self.magnitudes >= lo) & (self.magnitudes <= hi)
        return float(np.max(self.per_xi[keep]))


PHASE_STEP_WARNING = 1.0


def oscillatory_integral(x: SampledPath, xi):
    """Cumulative trapezoid of exp(i xi . X) from t0 to every node."""
    phase = x.values @ np.asarray(xi, dtype=np.float64)
    e = np.exp(1j * phase)
    h = np.diff(x.times)
    out = np.zeros(len(e), dtype=np.complex128)
    np.cumsum(0.5 * h * (e[:-1] + e[1:]), out=out[1:])
    return out


def irregularity_norm(x: SampledPath, spec: IrregularitySpec, threads=None) -> IrregularityResult:
    """Grid estimate of sup over xi and pairs of (1+|xi|)^rho |t-s|^-gamma_w |int_s^t e^{i xi.X}|.

    Ties are resolved towards the smallest (|xi|, s, t).
    """
    xi_grid = spec.frequencies(x.dim)
    mags = np.linalg.norm(xi_grid, axis=1)
    worst = float(np.max(mags) * np.max(np.linalg.norm(np.diff(x.values, axis=0), axis=1), initial=0.0))
    if worst > PHASE_STEP_WARNING:
        warnings.warn(
            f"max |xi| |dX| per step is {worst:.3g}; trapezoid oscillatory integrals are under-resolved",
            RuntimeWarning,
            stacklevel=2,
        )

    def one(k):
        cum = oscillatory_integral(x, xi_grid[k])
        val, i, j = kernels.oscillatory_pair_max(
            cum.real.copy(), cum.imag.copy(), x.times, spec.gamma_w, spec.pair_stride
        )
        return (1.0 + mags[k]) ** spec.rho * val, i, j

    results = ordered_map(one, range(len(xi_grid)), threads)
    per_xi = np.array([r[0] for r in results])
    order = sorted(
        range(len(results)),
        key=lambda k: (-results[k][0], mags[k], results[k][1], results[k][2]),
    )
    best = order[0]
    val, i, j = results[best]
    t = x.times
    return IrregularityResult(float(val), xi_grid[best].copy(), float(t[i]), float(t[j]), per_xi, mags)
