import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import piecewise_linear_area
from roughflow.grid import SampledPath, TimeGrid
from roughflow.roughpath import (
    RoughPath,
    chen_defect,
    lift_path,
    lift_smooth,
    max_chen_defect,
    max_symmetry_defect,
    roughpath_distance,
    roughpath_norm,
    symmetry_defect,
)

finite = st.floats(-5, 5, allow_nan=False)


def test_lift_matches_stepwise_oracle(brownian_path):
    rp = lift_path(brownian_path)
    x = brownian_path.values
    for i, j in [(0, 1), (0, 128), (17, 90), (64, 65)]:
        assert np.allclose(rp.area_index(i, j), piecewise_linear_area(x, i, j), atol=1e-13)


def test_lift_refinement_is_exact_for_linear_steps(brownian_path):
    a = lift_path(brownian_path)
    b = lift_path(brownian_path, refinement=7)
    assert np.allclose(a.adjacent, b.adjacent, atol=1e-15)


def test_smooth_lift_of_line_has_no_area():
    g = TimeGrid(0, 1, 17)
    rp = lift_smooth(lambda t: np.stack([t, 2 * t], axis=1), lambda t: np.tile([1.0, 2.0], (len(t), 1)), g)
    assert np.allclose(rp.area(0.0, 1.0), 0.5 * np.outer([1, 2], [1, 2]), atol=1e-14)


def test_smooth_lift_area_of_parabola():
    # X = (t, t^2): XX(0,1) = [[1/2, 2/3], [1/3, 1/2]]
    g = TimeGrid(0, 1, 65)
    rp = lift_smooth(lambda t: np.stack([t, t * t], axis=1), lambda t: np.stack([np.ones_like(t), 2 * t], axis=1),
                     g, refinement=32)
    assert np.allclose(rp.area(0.0, 1.0), [[0.5, 2 / 3], [1 / 3, 0.5]], atol=1e-6)


@given(arrays(np.float64, (9, 2), elements=finite))
def test_chen_relation_holds_for_any_lift(values):
    rp = lift_path(SampledPath(TimeGrid(0, 1, 9), values))
    scale = 1 + np.max(np.abs(values)) ** 2
    assert max_chen_defect(rp) <= 1e-12 * scale
    assert max_symmetry_defect(rp) <= 1e-12 * scale


def test_chen_defect_detects_perturbation(brownian_path):
    rp = lift_path(brownian_path)
    dense = rp.dense_area().copy()
    dense[0, 128] += 0.1
    bad = RoughPath.from_dense(brownian_path, dense)
    t = brownian_path.times
    defect = chen_defect(bad, t[0], t[50], t[128])
    assert np.abs(defect).max() == pytest.approx(0.1)
    assert max_chen_defect(bad) == pytest.approx(0.2)


def test_sampled_chen_scan_above_exhaustive_limit(rng):
    g = TimeGrid(0, 1, 513)
    x = SampledPath(g, np.cumsum(rng.standard_normal((513, 2)), axis=0) * np.sqrt(g.step))
    assert max_chen_defect(lift_path(x), exhaustive_limit=257, n_samples=2000) <= 1e-12


def test_symmetry_defect_single_pair(brownian_path):
    rp = lift_path(brownian_path)
    t = brownian_path.times
    assert np.abs(symmetry_defect(rp, t[5], t[77])).max() <= 1e-14


def test_norm_and_distance(brownian_path):
    rp = lift_path(brownian_path)
    assert roughpath_distance(rp, rp) == 0.0
    assert roughpath_norm(rp) > 0
    zero = lift_path(SampledPath(brownian_path.grid, np.zeros((129, 2))))
    assert roughpath_distance(rp, zero) == pytest.approx(roughpath_norm(rp), rel=1e-12)


def test_gamma_range_enforced(brownian_path):
    with pytest.raises(ValueError, match="1/3, 1/2"):
        lift_path(brownian_path, gamma=0.6)
    with pytest.raises(ValueError):
        lift_path(brownian_path, gamma=1 / 3)


def test_csv_round_trip(tmp_path, brownian_path):
    rp = lift_path(brownian_path)
    rp.to_csv(tmp_path / "x.csv", tmp_path / "xx.csv")
    back = RoughPath.from_csv(tmp_path / "x.csv", tmp_path / "xx.csv")
    assert np.array_equal(back.adjacent, rp.adjacent)
    assert np.allclose(back.area_index(0, 128), rp.area_index(0, 128), atol=1e-15)
