"""Pure numpy implementations of the pair-scan kernels.

Each function mirrors a routine of the compiled ``_kernels`` extension with
the same signature and the same tie-breaking: pairs are visited in
lexicographic order ``(i, j)`` and the first strict maximum wins.
All functions return ``(value, i, j)`` with ``i = j = -1`` when no admissible
pair exists.
"""

import numpy as np

_EMPTY = (0.0, -1, -1)


def _pair_offsets(n, dyadic):
    if dyadic:
        offsets = []
        m = 1
        while m < n:
            offsets.append(m)
            m *= 2
        return offsets
    return range(1, n)


def _reduce(best, cand):
    # cand = (value, i, j); lexicographic tie-break on (i, j)
    if cand[1] < 0:
        return best
    if best[1] < 0 or cand[0] > best[0]:
        return cand
    if cand[0] == best[0] and (cand[1], cand[2]) < (best[1], best[2]):
        return cand
    return best


def _scan_by_offset(ratio_for_offset, n, dyadic, times, window):
    best = _EMPTY
    for k in _pair_offsets(n, dyadic):
        i = np.arange(0, n - k)
        j = i + k
        dt = times[j] - times[i]
        keep = dt <= window
        if not keep.any():
            continue
        r = ratio_for_offset(i[keep], j[keep], dt[keep])
        a = int(np.argmax(r))
        best = _reduce(best, (float(r[a]), int(i[keep][a]), int(j[keep][a])))
    return best


def holder_max(values, times, gamma, window=np.inf, dyadic=False):
    n = values.shape[0]

    def ratio(i, j, dt):
        diff = values[j] - values[i]
        return np.sqrt(np.sum(diff * diff, axis=1)) / dt ** gamma

    return _scan_by_offset(ratio, n, dyadic, times, window)


def two_param_max(norms, times, nu, window=np.inf):
    n = norms.shape[0]

    def ratio(i, j, dt):
        return norms[i, j] / dt ** nu

    return _scan_by_offset(ratio, n, False, times, window)


def area_ratio_max(x1, s1, x2, s2, times, nu, window=np.inf, dyadic=False):
    n, d = x1.shape
    s1 = s1.reshape(n, d, d)
    s2 = s2.reshape(n, d, d)

    def ratio(i, j, dt):
        a1 = s1[j] - s1[i] - x1[i][:, :, None] * (x1[j] - x1[i])[:, None, :]
        a2 = s2[j] - s2[i] - x2[i][:, :, None] * (x2[j] - x2[i])[:, None, :]
        diff = (a1 - a2).reshape(len(i), -1)
        return np.sqrt(np.sum(diff * diff, axis=1)) / dt ** nu

    return _scan_by_offset(ratio, n, dyadic, times, window)


def remainder_max(y, yp, x, times, nu, window=np.inf, dyadic=False):
    n, m = y.shape
    d = x.shape[1]
    yp = yp.reshape(n, m, d)

    def ratio(i, j, dt):
        rem = y[j] - y[i] - np.einsum("kab,kb->ka", yp[i], x[j] - x[i])
        return np.sqrt(np.sum(rem * rem, axis=1)) / dt ** nu

    return _scan_by_offset(ratio, n, dyadic, times, window)


def local_controlled_max(y, yp, x, times, gamma, window):
    n, m = y.shape
    d = x.shape[1]
    ypm = yp.reshape(n, m, d)

    def ratio(i, j, dt):
        dy = y[j] - y[i]
        dyp = yp[j] - yp[i]
        rem = dy - np.einsum("kab,kb->ka", ypm[i], x[j] - x[i])
        return (
            np.sqrt(np.sum(dy * dy, axis=1)) / dt ** gamma
            + np.sqrt(np.sum(dyp * dyp, axis=1)) / dt ** gamma
            + np.sqrt(np.sum(rem * rem, axis=1)) / dt ** (2.0 * gamma)
        )

    return _scan_by_offset(ratio, n, False, times, window)


def chen_defect_max(x, area):
    """Largest Frobenius norm of the Chen defect over all triples i <= k <= j.

    ``area`` has shape ``(n, n, d*d)`` with the level-2 value of the pair (i, j).
    """
    n, d = x.shape
    a = area.reshape(n, n, d, d)
    best = 0.0
    arg = (-1, -1, -1)
    for i in range(n):
        # triples (i, k, j) with i <= k <= j
        ks = np.arange(i, n)
        dx_ik = x[ks] - x[i]                       # (K, d)
        dx_kj = x[None, :, :] - x[ks][:, None, :]  # (K, n, d)
        defect = (
            a[i][None, :, :, :]
            - a[i, ks][:, None, :, :]
            - a[ks]
            - dx_ik[:, None, :, None] * dx_kj[:, :, None, :]
        )
        norms = np.sqrt(np.sum(defect.reshape(len(ks), n, -1) ** 2, axis=2))
        kk, jj = np.meshgrid(ks, np.arange(n), indexing="ij")
        norms = np.where(jj >= kk, norms, -1.0)
        flat = int(np.argmax(norms))
        val = norms.flat[flat]
        if val > best:
            best = float(val)
            arg = (i, int(ks[flat // n]), int(flat % n))
    return best, arg[0], arg[1], arg[2]


def oscillatory_pair_max(cum_re, cum_im, times, gamma, stride=1):
    idx = np.arange(0, cum_re.shape[0], stride)
    re = cum_re[idx]
    im = cum_im[idx]
    t = times[idx]
    n = len(idx)
    best = _EMPTY
    for k in range(1, n):
        i = np.arange(0, n - k)
        j = i + k
        r = np.hypot(re[j] - re[i], im[j] - im[i]) / (t[j] - t[i]) ** gamma
        a = int(np.argmax(r))
        best = _reduce(best, (float(r[a]), int(idx[i[a]]), int(idx[j[a]])))
    return best


def spatial_holder_max(values, points, alpha):
    p = values.shape[0]
    best = _EMPTY
    for k in range(1, p):
        i = np.arange(0, p - k)
        j = i + k
        dv = values[j] - values[i]
        dx = points[j] - points[i]
        dist = np.sqrt(np.sum(dx * dx, axis=1))
        keep = dist > 0
        if not keep.any():
            continue
        r = np.sqrt(np.sum(dv[keep] ** 2, axis=1)) / dist[keep] ** alpha
        a = int(np.argmax(r))
        best = _reduce(best, (float(r[a]), int(i[keep][a]), int(j[keep][a])))
    return best
