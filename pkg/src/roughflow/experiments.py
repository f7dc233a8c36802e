"""Experiment kinds run from a validated config.

``prepare`` turns a config into the objects a run needs without doing any
heavy computation; ``run_experiment`` executes the kind, writes its CSV
artifacts into the output directory and returns the scalar results.
"""

from __future__ import annotations

import csv
import itertools
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .controlled import ControlledPath, rough_integral
from .drivers import (
    CHOLESKY_LIMIT,
    DEFAULT_MAGNITUDES,
    FbmSpec,
    IrregularitySpec,
    default_xi_grid,
    fbm_covariance,
    irregularity_norm,
    lift_fbm,
    sample_fbm_batch,
)
from .fields import TestFunction, field_from_spec, mollify
from .flows import apriori_holder_check, jacobian_determinant, solve_flow
from .grid import SampledPath, TimeGrid
from .roughpath import DEFAULT_GAMMA, RoughPath, check_gamma, lift_path, lift_smooth
from .transport import (
    TransportProblem,
    duality_bound,
    gubinelli_norm,
    initial_from_spec,
    residual_slope,
    sample_weak_solution,
    strong_solution,
    weak_identity_defect,
)

log = logging.getLogger(__name__)


@dataclass
class Prepared:
    config: dict
    grid: TimeGrid
    gamma: float
    driver_spec: dict
    dim: int
    field: object = None
    fbm: FbmSpec | None = None


def _driver_dim(spec):
    for key in ("velocity", "amplitude"):
        if key in spec:
            return len(spec[key])
    return int(spec.get("dim", 1))


def prepare(config: dict) -> Prepared:
    """Build and range-check everything the run needs (no sampling, no flows)."""
    g = config["grid"]
    grid = TimeGrid(0.0, float(g.get("horizon", 1.0)), g["n_points"])
    gamma = check_gamma(config.get("gamma", DEFAULT_GAMMA))
    dspec = config["driver"]
    dim = _driver_dim(dspec)
    prep = Prepared(config, grid, gamma, dspec, dim)

    kind = dspec["type"]
    if kind == "fbm":
        if "hurst" not in dspec:
            raise ValueError("fbm driver requires 'hurst'")
        prep.fbm = FbmSpec(dspec["hurst"], dim, grid.horizon, config.get("seed", 0))
        n_max = grid.n_points
        if config["kind"] == "convergence":
            n_max = 2 ** (max(config["levels"]) + 2) + 1
        if n_max > CHOLESKY_LIMIT:
            raise ValueError(f"fbm drivers support at most {CHOLESKY_LIMIT} grid points, need {n_max}")
    elif kind == "sine" and "amplitude" not in dspec:
        raise ValueError("sine driver requires 'amplitude'")
    elif kind == "linear" and "velocity" not in dspec:
        raise ValueError("linear driver requires 'velocity'")

    if "field" in config:
        prep.field = field_from_spec(config["field"])
        if prep.field.dim != dim:
            raise ValueError(f"field dimension {prep.field.dim} does not match driver dimension {dim}")
    elif config["kind"] == "convergence" and config["quantity"] == "flow-endpoint":
        raise ValueError("flow-endpoint convergence requires 'field'")

    if config["kind"] in ("transport-residual", "duality-sweep"):
        if prep.fbm is not None and not gamma < prep.fbm.hurst:
            raise ValueError(f"gamma={gamma} must be below the Hurst index {prep.fbm.hurst}")
        initial_from_spec(config["initial"])
        for tf in config.get("test_functions", []) + ([config["test_function"]] if "test_function" in config else []):
            _test_function(tf, dim)
    if config["kind"] == "duality-sweep":
        grid.index_of(float(config.get("t0", grid.horizon)))
        if not np.isfinite(prep.field.sup_bound()):
            raise ValueError("duality-sweep needs a bounded field")
    if config["kind"] == "fbm":
        if prep.fbm is None:
            raise ValueError("kind 'fbm' needs an fbm driver")
        for t in config.get("covariance_times", [0.5, 1.0]):
            grid.index_of(float(t))
    if config["kind"] == "irregularity":
        IrregularitySpec(config["rho"], config.get("gamma_w", 0.55), pair_stride=config.get("pair_stride", 1))
    if "points" in config and any(len(p) != dim for p in config["points"]):
        raise ValueError(f"every point must have {dim} coordinates")
    return prep


def _test_function(spec, dim):
    tf = TestFunction(spec["center"], spec["radius"], spec.get("degree", 0))
    if tf.dim != dim:
        raise ValueError(f"test function center has {tf.dim} coordinates, expected {dim}")
    return tf


def build_path(prep: Prepared, grid: TimeGrid | None = None) -> SampledPath:
    grid = prep.grid if grid is None else grid
    spec = prep.driver_spec
    t = grid.nodes[:, None]
    kind = spec["type"]
    if kind == "fbm":
        return SampledPath(grid, sample_fbm_batch(prep.fbm, grid, 1)[0])
    if kind == "linear":
        return SampledPath(grid, t * np.asarray(spec["velocity"], dtype=np.float64))
    if kind == "sine":
        amp = np.asarray(spec["amplitude"], dtype=np.float64)
        return SampledPath(grid, np.sin(2 * np.pi * spec.get("frequency", 1.0) * t) * amp)
    return SampledPath(grid, np.zeros((grid.n_points, prep.dim)))


def build_rough_path(prep: Prepared, path: SampledPath) -> RoughPath:
    spec = prep.driver_spec
    if spec["type"] == "sine":
        amp = np.asarray(spec["amplitude"], dtype=np.float64)
        w = 2 * np.pi * spec.get("frequency", 1.0)
        return lift_smooth(
            lambda s: np.sin(w * s)[:, None] * amp,
            lambda s: (w * np.cos(w * s))[:, None] * amp,
            path.grid,
            gamma=prep.gamma,
        )
    if spec["type"] == "fbm":
        return lift_fbm(path, prep.gamma, prep.fbm.hurst)
    return lift_path(path, gamma=prep.gamma)


def _fmt(v):
    return format(float(v), ".17g")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else _fmt(v) for v in row])


# individual kinds


def _run_fbm(prep, out, threads):
    cfg = prep.config
    n_samples = cfg.get("samples", 20000)
    s, t = (float(v) for v in cfg.get("covariance_times", [0.5, 1.0]))
    i, j = prep.grid.index_of(s), prep.grid.index_of(t)
    batch = sample_fbm_batch(prep.fbm, prep.grid, n_samples)
    SampledPath(prep.grid, batch[0]).to_csv(out / "path.csv")
    prod = batch[:, i, :] * batch[:, j, :]
    cov = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / np.sqrt(n_samples)
    exact = float(fbm_covariance([s, t], prep.fbm.hurst)[0, 1])
    var_s = batch[:, i, :].var(axis=0, ddof=1)
    var_t = batch[:, j, :].var(axis=0, ddof=1)
    return {
        "samples": n_samples,
        "covariance_times": [s, t],
        "covariance": cov.tolist(),
        "covariance_exact": exact,
        "standard_error": se.tolist(),
        "z_scores": ((cov - exact) / se).tolist(),
        "variance_ratio": (var_t / var_s).tolist() if s > 0 else None,
        "variance_ratio_exact": (t / s) ** (2 * prep.fbm.hurst) if s > 0 else None,
    }


def _run_irregularity(prep, out, threads):
    cfg = prep.config
    path = build_path(prep)
    path.to_csv(out / "path.csv")
    mags = cfg.get("magnitudes", list(DEFAULT_MAGNITUDES))
    spec = IrregularitySpec(
        cfg["rho"], cfg.get("gamma_w", 0.55), default_xi_grid(prep.dim, mags), cfg.get("pair_stride", 1)
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = irregularity_norm(path, spec, threads=threads)
    xi = spec.frequencies(prep.dim)
    _write_csv(
        out / "irregularity.csv",
        [f"xi_{a + 1}" for a in range(prep.dim)] + ["magnitude", "value"],
        [list(x) + [m, v] for x, m, v in zip(xi, res.magnitudes, res.per_xi)],
    )
    split = cfg.get("split_magnitude", 8.0)
    has_low, has_high = np.any(res.magnitudes <= split), np.any(res.magnitudes >= split)
    low = res.max_over(0.0, split) if has_low else None
    high = res.max_over(split, np.inf) if has_high else None
    per_mag = [[float(m), res.max_over(m - 1e-9, m + 1e-9)] for m in np.unique(res.magnitudes.round(9))]
    return {
        "value": res.value,
        "argmax_xi": res.xi.tolist(),
        "argmax_s": res.s,
        "argmax_t": res.t,
        "max_by_magnitude": per_mag,
        "max_low": low,
        "max_high": high,
        "high_low_ratio": high / low if has_low and has_high and low > 0 else None,
        "warnings": [str(w.message) for w in caught],
    }


def _run_flow(prep, out, threads):
    cfg = prep.config
    path = build_path(prep)
    path.to_csv(out / "path.csv")
    with_derivative = cfg.get("with_derivative", True)
    ff = solve_flow(
        prep.field, path, np.asarray(cfg["points"], dtype=np.float64), with_derivative=with_derivative,
        method=cfg.get("method", "rk4"), substeps=cfg.get("substeps", 1), threads=threads,
    )
    ff.to_csv(out / "flow.csv")
    check = apriori_holder_check(ff, prep.gamma)
    results = {
        "final": ff.final().tolist(),
        "apriori_pass": check["pass"],
        "apriori_max_ratio": float(max(check["ratio"])),
        "apriori_constant": check["constant"],
    }
    if with_derivative:
        gaps = [jacobian_determinant(ff, p).max_relative_gap() for p in range(ff.phi.shape[1])]
        results["jacobian_max_relative_gap"] = float(max(gaps))
        results["final_determinant"] = [float(np.linalg.det(m)) for m in ff.dphi[-1]]
    return results


def _snapshot_points(prep, phis, count):
    lo = min(float(np.min(p.center)) - p.radius for p in phis)
    hi = max(float(np.max(p.center)) + p.radius for p in phis)
    axis = np.linspace(lo, hi, count)
    return np.array(list(itertools.product(axis, repeat=prep.dim)))


def _run_transport_residual(prep, out, threads):
    cfg = prep.config
    path = build_path(prep)
    path.to_csv(out / "path.csv")
    rp = build_rough_path(prep, path)
    problem = TransportProblem(prep.field, rp, initial_from_spec(cfg["initial"]), gamma=prep.gamma)
    phis = [_test_function(tf, prep.dim) for tf in cfg["test_functions"]]
    spacing = min(p.radius for p in phis) / cfg.get("points_per_radius", 64)
    sample = sample_weak_solution(problem, phis, spacing=spacing, threads=threads)
    rows, fits = [], []
    for q, phi in enumerate(phis):
        fit = residual_slope(
            sample, phi, cfg.get("min_steps", 4), cfg.get("max_fraction", 0.25), cfg.get("statistic", "max")
        )
        rows.extend([q, lag, val] for lag, val in zip(fit.lags, fit.maxima))
        fits.append({
            "slope": fit.slope,
            "gubinelli_norm": gubinelli_norm(sample, phi, prep.gamma),
            "weak_identity_defect": weak_identity_defect(sample, phi),
        })
    _write_csv(out / "residuals.csv", ["test_function", "lag", "residual"], rows)

    count = cfg.get("snapshot_points", 65 if prep.dim == 1 else 17)
    pts = _snapshot_points(prep, phis, count)
    u = strong_solution(problem, prep.grid.t1, pts, threads=threads)
    _write_csv(
        out / "snapshot.csv",
        [f"x{a + 1}" for a in range(prep.dim)] + ["u"],
        [list(x) + [v] for x, v in zip(pts, u)],
    )
    target = 3 * prep.gamma
    return {
        "spacing": spacing,
        "slope_target": target,
        "test_functions": fits,
        "min_slope": float(min(f["slope"] for f in fits)),
        "slopes_pass": bool(all(f["slope"] >= target - 0.15 for f in fits)),
        "sup_abs": sample.sup_abs,
    }


def _run_duality_sweep(prep, out, threads):
    cfg = prep.config
    path = build_path(prep)
    path.to_csv(out / "path.csv")
    rp = build_rough_path(prep, path)
    problem = TransportProblem(prep.field, rp, initial_from_spec(cfg["initial"]), gamma=prep.gamma)
    phi0 = _test_function(cfg["test_function"], prep.dim)
    t0 = float(cfg.get("t0", prep.grid.t1))
    spacing = phi0.radius / cfg.get("points_per_radius", 32)
    rows = []
    for eps in cfg["epsilons"]:
        log.info("duality sweep: eps=%g", eps)
        r = duality_bound(problem, mollify(prep.field, eps), phi0, t0, spacing=spacing, identity=True)
        rows.append({
            "epsilon": float(eps),
            "lhs": r["lhs"],
            "rhs": r["rhs"],
            "identity_gap": abs(r["identity_lhs"] - r["identity_integral"]),
        })
    _write_csv(
        out / "duality.csv",
        ["epsilon", "lhs", "rhs", "identity_gap"],
        [[r["epsilon"], r["lhs"], r["rhs"], r["identity_gap"]] for r in rows],
    )
    order = np.argsort([-r["epsilon"] for r in rows], kind="stable")
    rhs = np.array([rows[k]["rhs"] for k in order])
    return {
        "sweep": rows,
        "rhs_strictly_decreasing": bool(np.all(np.diff(rhs) < 0)),
        "bound_holds": bool(all(r["lhs"] <= r["rhs"] for r in rows)),
        "max_identity_gap": float(max(r["identity_gap"] for r in rows)),
    }


def _coarse_rough_path(rp: RoughPath, stride):
    n = rp.grid.n_points
    idx = np.arange(0, n, stride)
    adjacent = np.stack([rp.area_index(a, b) for a, b in zip(idx[:-1], idx[1:])])
    return RoughPath(rp.base.subsample(stride), adjacent, rp.gamma)


def _sine_integral(rp: RoughPath):
    x = rp.base.values
    n, d = x.shape
    deriv = np.zeros((n, d, d))
    deriv[:, np.arange(d), np.arange(d)] = np.cos(x)
    cp = ControlledPath.from_arrays(rp.grid, np.sin(x), deriv.reshape(n, d * d), rp.gamma)
    return float(rough_integral(cp, rp, rp.grid.t0, rp.grid.t1))


def convergence_study(prep: Prepared, out: Path | None = None, threads=None):
    """Error of the chosen quantity at each dyadic level against a reference two levels finer.

    ``flow-endpoint``: RK4 flow endpoints driven by the subsampled path.
    ``rough-integral``: compensated sums of int sin(X) dX on coarse nodes of one fixed rough path.
    Returns the table rows and the least-squares slope of log error against log step.
    """
    cfg = prep.config
    levels = sorted(set(cfg["levels"]))
    ref_level = levels[-1] + 2
    fine = TimeGrid(0.0, prep.grid.horizon, 2 ** ref_level + 1)
    path = build_path(prep, fine)
    if cfg["quantity"] == "flow-endpoint":
        points = np.asarray(cfg.get("points", [[0.0] * prep.dim]), dtype=np.float64)

        def quantity(stride):
            ff = solve_flow(prep.field, path.subsample(stride), points, method=cfg.get("method", "rk4"),
                            threads=threads)
            return ff.final()
    else:
        rp = build_rough_path(prep, path)

        def quantity(stride):
            return _sine_integral(_coarse_rough_path(rp, stride))

    reference = np.asarray(quantity(1))
    rows = []
    for lvl in levels:
        stride = 2 ** (ref_level - lvl)
        err = float(np.max(np.abs(np.asarray(quantity(stride)) - reference)))
        rows.append({"level": lvl, "step": fine.horizon / 2 ** lvl, "error": err})
    steps = np.array([r["step"] for r in rows])
    errs = np.array([r["error"] for r in rows])
    keep = errs > 0
    slope = float(np.polyfit(np.log(steps[keep]), np.log(errs[keep]), 1)[0]) if keep.sum() >= 2 else None
    if out is not None:
        _write_csv(out / "convergence.csv", ["level", "step", "error"],
                   [[r["level"], r["step"], r["error"]] for r in rows])
    return {"quantity": cfg["quantity"], "reference_level": ref_level, "table": rows, "fitted_slope": slope}


RUNNERS = {
    "fbm": _run_fbm,
    "irregularity": _run_irregularity,
    "flow": _run_flow,
    "transport-residual": _run_transport_residual,
    "duality-sweep": _run_duality_sweep,
    "convergence": convergence_study,
}


def run_experiment(config: dict, out: Path, threads=None) -> dict:
    prep = prepare(config)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[config["kind"]](prep, out, threads)
