# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-scan kernels.

Every routine visits pairs in lexicographic order and keeps the first strict
maximum, so results match the numpy fallback in ``_kernels_py`` up to
rounding in ``pow``.  Loops run without the GIL so callers may scan several
inputs from a thread pool.
"""

from libc.math cimport sqrt, pow, hypot, INFINITY


cdef inline bint _admissible(Py_ssize_t k, bint dyadic) noexcept nogil:
    # k > 0 is a power of two
    if not dyadic:
        return True
    return (k & (k - 1)) == 0


def holder_max(const double[:, ::1] values, const double[::1] times, double gamma,
               double window=INFINITY, bint dyadic=False):
    cdef Py_ssize_t n = values.shape[0], d = values.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double best = 0.0, acc, diff, dt, r
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if not _admissible(j - i, dyadic):
                    continue
                dt = times[j] - times[i]
                if dt > window:
                    break
                acc = 0.0
                for c in range(d):
                    diff = values[j, c] - values[i, c]
                    acc = acc + diff * diff
                r = sqrt(acc) / pow(dt, gamma)
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
    return best, bi, bj


def two_param_max(const double[:, ::1] norms, const double[::1] times, double nu,
                  double window=INFINITY):
    cdef Py_ssize_t n = norms.shape[0]
    cdef Py_ssize_t i, j
    cdef double best = 0.0, dt, r
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dt = times[j] - times[i]
                if dt > window:
                    break
                r = norms[i, j] / pow(dt, nu)
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
    return best, bi, bj


def area_ratio_max(const double[:, ::1] x1, const double[:, ::1] s1,
                   const double[:, ::1] x2, const double[:, ::1] s2,
                   const double[::1] times, double nu,
                   double window=INFINITY, bint dyadic=False):
    """Sup over pairs of |A1(i,j) - A2(i,j)| / (t_j - t_i)^nu.

    The level-2 values are rebuilt from prefix sums:
    A(i, j) = S_j - S_i - x_i (x) (x_j - x_i), with ``s`` stored as (n, d*d).
    """
    cdef Py_ssize_t n = x1.shape[0], d = x1.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double best = 0.0, acc, v1, v2, dt, r
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if not _admissible(j - i, dyadic):
                    continue
                dt = times[j] - times[i]
                if dt > window:
                    break
                acc = 0.0
                for a in range(d):
                    for b in range(d):
                        v1 = s1[j, a * d + b] - s1[i, a * d + b] - x1[i, a] * (x1[j, b] - x1[i, b])
                        v2 = s2[j, a * d + b] - s2[i, a * d + b] - x2[i, a] * (x2[j, b] - x2[i, b])
                        acc = acc + (v1 - v2) * (v1 - v2)
                r = sqrt(acc) / pow(dt, nu)
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
    return best, bi, bj


def remainder_max(const double[:, ::1] y, const double[:, ::1] yp,
                  const double[:, ::1] x, const double[::1] times, double nu,
                  double window=INFINITY, bint dyadic=False):
    """Sup over pairs of |y_j - y_i - y'_i (x_j - x_i)| / (t_j - t_i)^nu.

    ``yp`` is (n, m*d), row-major in (m, d).
    """
    cdef Py_ssize_t n = y.shape[0], m = y.shape[1], d = x.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double best = 0.0, acc, rem, dt, r
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if not _admissible(j - i, dyadic):
                    continue
                dt = times[j] - times[i]
                if dt > window:
                    break
                acc = 0.0
                for a in range(m):
                    rem = y[j, a] - y[i, a]
                    for b in range(d):
                        rem = rem - yp[i, a * d + b] * (x[j, b] - x[i, b])
                    acc = acc + rem * rem
                r = sqrt(acc) / pow(dt, nu)
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
    return best, bi, bj


def local_controlled_max(const double[:, ::1] y, const double[:, ::1] yp,
                         const double[:, ::1] x, const double[::1] times,
                         double gamma, double window):
    """Sup over pairs with t_j - t_i <= window of the summed local quotients."""
    cdef Py_ssize_t n = y.shape[0], m = y.shape[1], d = x.shape[1]
    cdef Py_ssize_t i, j, a, b
    cdef double best = 0.0, ady, adp, arem, diff, rem, dt, r, g1, g2
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dt = times[j] - times[i]
                if dt > window:
                    break
                ady = 0.0
                arem = 0.0
                for a in range(m):
                    diff = y[j, a] - y[i, a]
                    ady = ady + diff * diff
                    rem = diff
                    for b in range(d):
                        rem = rem - yp[i, a * d + b] * (x[j, b] - x[i, b])
                    arem = arem + rem * rem
                adp = 0.0
                for a in range(m * d):
                    diff = yp[j, a] - yp[i, a]
                    adp = adp + diff * diff
                g1 = pow(dt, gamma)
                g2 = pow(dt, 2.0 * gamma)
                r = sqrt(ady) / g1 + sqrt(adp) / g1 + sqrt(arem) / g2
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
    return best, bi, bj


def chen_defect_max(const double[:, ::1] x, const double[:, :, ::1] area):
    """Largest Frobenius Chen defect over triples i <= k <= j; ``area`` is (n, n, d*d)."""
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, k, j, a, b
    cdef double best = 0.0, acc, v
    cdef Py_ssize_t bi = -1, bk = -1, bj = -1
    with nogil:
        for i in range(n):
            for k in range(i, n):
                for j in range(k, n):
                    acc = 0.0
                    for a in range(d):
                        for b in range(d):
                            v = (area[i, j, a * d + b] - area[i, k, a * d + b]
                                 - area[k, j, a * d + b]
                                 - (x[k, a] - x[i, a]) * (x[j, b] - x[k, b]))
                            acc = acc + v * v
                    v = sqrt(acc)
                    if v > best:
                        best = v
                        bi = i
                        bk = k
                        bj = j
    return best, bi, bk, bj


def oscillatory_pair_max(const double[::1] cum_re, const double[::1] cum_im,
                         const double[::1] times, double gamma, Py_ssize_t stride=1):
    cdef Py_ssize_t n = cum_re.shape[0]
    cdef Py_ssize_t i, j
    cdef double best = 0.0, r
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        i = 0
        while i < n:
            j = i + stride
            while j < n:
                r = hypot(cum_re[j] - cum_re[i], cum_im[j] - cum_im[i]) / pow(times[j] - times[i], gamma)
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
                j = j + stride
            i = i + stride
    return best, bi, bj


def spatial_holder_max(const double[:, ::1] values, const double[:, ::1] points, double alpha):
    cdef Py_ssize_t p = values.shape[0], m = values.shape[1], d = points.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double best = 0.0, dv, dx, diff, r
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(p):
            for j in range(i + 1, p):
                dx = 0.0
                for c in range(d):
                    diff = points[j, c] - points[i, c]
                    dx = dx + diff * diff
                if dx <= 0.0:
                    continue
                dv = 0.0
                for c in range(m):
                    diff = values[j, c] - values[i, c]
                    dv = dv + diff * diff
                r = sqrt(dv) / pow(sqrt(dx), alpha)
                if bi < 0 or r > best:
                    best = r
                    bi = i
                    bj = j
    return best, bi, bj
