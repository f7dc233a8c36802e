"""Time the compiled pair-scan kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints one line per kernel with the best-of-N wall time of each backend and
the speed-up, after checking that both backends return the same maximiser.
"""

import argparse
import time

import numpy as np

from roughflow import kernels
from roughflow.drivers import FbmSpec, oscillatory_integral, sample_fbm
from roughflow.roughpath import lift_path


def cases():
    path = sample_fbm(FbmSpec(0.4, dim=2, seed=1), n_points=2049)
    small = sample_fbm(FbmSpec(0.4, dim=2, seed=2), n_points=257)
    rp = lift_path(small)
    c = np.ascontiguousarray
    t = c(path.times)
    x = c(path.values)
    cum = oscillatory_integral(path, [8.0, 0.0])
    y = np.sin(x)
    yp = np.zeros((len(t), 2, 2))
    yp[:, 0, 0], yp[:, 1, 1] = np.cos(path.values[:, 0]), np.cos(path.values[:, 1])
    pts = np.random.default_rng(0).uniform(-1, 1, (800, 2))
    return {
        "holder_max N=2049": lambda be: be.holder_max(x, t, 0.4, np.inf, False),
        "remainder_max N=2049": lambda be: be.remainder_max(y, c(yp.reshape(len(t), -1)), x, t, 0.8, np.inf, False),
        "chen_defect_max N=257": lambda be: be.chen_defect_max(c(small.values), c(rp.dense_area().reshape(257, 257, -1))),
        "oscillatory_pair_max N=2049": lambda be: be.oscillatory_pair_max(cum.real.copy(), cum.imag.copy(), t, 0.55, 1),
        "spatial_holder_max P=800": lambda be: be.spatial_holder_max(c(np.sin(pts)), pts, 0.5),
    }


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if "compiled" not in kernels.available_backends():
        print("compiled kernels are not built; only the numpy fallback is available")
        return
    compiled, python = kernels.get_backend("compiled"), kernels.get_backend("python")
    print(f"{'kernel':<30}{'compiled [s]':>14}{'numpy [s]':>12}{'speed-up':>10}")
    for name, call in cases().items():
        tc, rc = best_time(lambda: call(compiled), args.repeat)
        tp, rp_ = best_time(lambda: call(python), args.repeat)
        assert np.isclose(rc[0], rp_[0], rtol=1e-12, atol=1e-300), (name, rc, rp_)
        print(f"{name:<30}{tc:>14.4f}{tp:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
