"""Backend selection for the pair-scan kernels.

The compiled extension is used when it imports; otherwise the numpy
implementations are used.  Setting ``ROUGHFLOW_PURE_PYTHON=1`` forces the
fallback, which the test-suite and the benchmark use to compare both.
"""

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available_backends():
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get_backend(name=None):
    """Return the kernel module for ``name`` ("compiled", "python" or None for the default)."""
    if name is None:
        name = BACKEND
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; reinstall with a C compiler")
        return _compiled
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown kernel backend {name!r}")


if _compiled is not None and os.environ.get("ROUGHFLOW_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = get_backend(BACKEND)


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def holder_max(values, times, gamma, window=np.inf, dyadic=False):
    return _active.holder_max(_c(values), _c(times), float(gamma), float(window), bool(dyadic))


def two_param_max(norms, times, nu, window=np.inf):
    return _active.two_param_max(_c(norms), _c(times), float(nu), float(window))


def area_ratio_max(x1, s1, x2, s2, times, nu, window=np.inf, dyadic=False):
    n = x1.shape[0]
    return _active.area_ratio_max(
        _c(x1), _c(s1).reshape(n, -1), _c(x2), _c(s2).reshape(n, -1),
        _c(times), float(nu), float(window), bool(dyadic),
    )


def remainder_max(y, yp, x, times, nu, window=np.inf, dyadic=False):
    n = y.shape[0]
    return _active.remainder_max(
        _c(y), _c(yp).reshape(n, -1), _c(x), _c(times), float(nu), float(window), bool(dyadic)
    )


def local_controlled_max(y, yp, x, times, gamma, window):
    n = y.shape[0]
    return _active.local_controlled_max(
        _c(y), _c(yp).reshape(n, -1), _c(x), _c(times), float(gamma), float(window)
    )


def chen_defect_max(x, area):
    n = x.shape[0]
    return _active.chen_defect_max(_c(x), _c(area).reshape(n, n, -1))


def oscillatory_pair_max(cum_re, cum_im, times, gamma, stride=1):
    return _active.oscillatory_pair_max(_c(cum_re), _c(cum_im), _c(times), float(gamma), int(stride))


def spatial_holder_max(values, points, alpha):
    return _active.spatial_holder_max(_c(values), _c(points), float(alpha))
