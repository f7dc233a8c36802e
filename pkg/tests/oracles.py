"""Slow, loop-based reference implementations used to check the library."""

import math

import numpy as np


def holder_naive(values, times, gamma, window=math.inf):
    values = np.asarray(values, dtype=float).reshape(len(times), -1)
    best = 0.0
    for i in range(len(times)):
        for j in range(i + 1, len(times)):
            dt = times[j] - times[i]
            if dt > window * (1 + 1e-12):
                break
            best = max(best, float(np.linalg.norm(values[j] - values[i])) / dt ** gamma)
    return best


def piecewise_linear_area(x, i, j):
    """int_{t_i}^{t_j} (X_r - X_{t_i}) (x) dX_r for the linear interpolant, summed step by step."""
    d = x.shape[1]
    area = np.zeros((d, d))
    for k in range(i, j):
        dx = x[k + 1] - x[k]
        area += np.outer(x[k] - x[i], dx) + 0.5 * np.outer(dx, dx)
    return area


def compensated_sum_naive(a, ad, x, area_fn, i, j):
    """sum_k a_k . dX_k + sum_{u,v} a'_k[u, v] XX_k[v, u] for a scalar integral (p = 1)."""
    total = 0.0
    for k in range(i, j):
        dx = x[k + 1] - x[k]
        xx = area_fn(k, k + 1)
        total += float(a[k] @ dx)
        d = len(dx)
        for u in range(d):
            for v in range(d):
                total += ad[k][u, v] * xx[v, u]
    return total


def fbm_cov(s, t, hurst):
    return 0.5 * (s ** (2 * hurst) + t ** (2 * hurst) - abs(t - s) ** (2 * hurst))


def line_oscillation(xi, s, t):
    """|int_s^t exp(i xi q) dq| in closed form."""
    if xi == 0:
        return t - s
    return abs(2.0 * math.sin(0.5 * xi * (t - s)) / xi)


def line_irregularity(xi, times, rho, gamma_w):
    """Closed-form sup over node pairs for X = t (vectorized over pairs)."""
    times = np.asarray(times, dtype=float)
    lag = times[None, :] - times[:, None]
    lag = lag[lag > 0]
    osc = lag if xi == 0 else np.abs(2.0 * np.sin(0.5 * xi * lag) / xi)
    return (1 + abs(xi)) ** rho * float(np.max(osc / lag ** gamma_w))


def bump(x, center, radius, degree=0):
    y = (np.asarray(x, dtype=float) - center) / radius
    r2 = float(np.sum(y * y))
    if r2 >= 1:
        return 0.0
    return (1 + y[0]) ** degree * math.exp(-1.0 / (1.0 - r2))


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for a in range(len(x)):
        e = np.zeros_like(x)
        e[a] = h
        g[a] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for a in range(len(x)):
        e = np.zeros_like(x)
        e[a] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)
