import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from al_lab.core import ConstantEta, DistributionSpec, LabeledSet, PiecewiseContinuous, ThresholdStep
from al_lab.errors import DegenerateInputError, InsufficientDataError
from al_lab.estimators import EstimatorSpec, predict_many
from al_lab.geometry import (cell_occupancy, coverage_1nn, exact_risk, k_cover_partition, mc_risk,
                             predicted_one_measure, prediction_intervals, structure_from_arrays)


def lset(xs, ys=None):
    xs = np.asarray(xs, dtype=float)
    return LabeledSet.from_arrays(xs, np.zeros(len(xs), int) if ys is None else ys)


@pytest.mark.parametrize("xs, edges", [
    ([0.25, 0.75], [0, 0.5, 1]),
    ([0.5], [0, 1]),
    ([0.0, 0.4, 1.0], [0, 0.2, 0.7, 1]),
])
def test_voronoi_examples(xs, edges):
    assert np.allclose(coverage_1nn(lset(xs)).edges, edges)


def test_duplicates_are_degenerate():
    with pytest.raises(DegenerateInputError):
        coverage_1nn(lset([0.3, 0.3]))


@pytest.mark.parametrize("xs, k, lengths", [
    ([0.1, 0.2, 0.9], 2, [0.5, 0.5]),
    ([0.1, 0.2, 0.9], 3, [1.0]),
    ([0.1, 0.2, 0.3, 0.9], 2, [0.2, 0.35, 0.45]),
])
def test_k_window_examples(xs, k, lengths):
    assert np.allclose(k_cover_partition(lset(xs), k).lengths, lengths)


def test_k_window_needs_k_points():
    with pytest.raises(InsufficientDataError):
        k_cover_partition(lset([0.1]), 2)


def test_predicted_one_measure_examples():
    assert predicted_one_measure(EstimatorSpec.knn(1), lset([0.25, 0.75], [1, 0])) == pytest.approx(0.5)
    assert predicted_one_measure(EstimatorSpec.histogram(0.5), lset([0.1, 0.6, 0.7], [1, 0, 0])) == 0.5


def test_knn_example_measure():
    # windows {.1,.2,.3} then {.2,.3,.9} switch at (0.1 + 0.9) / 2 = 0.5; the
    # second window holds a single one, so the measure is 0.5
    s = lset([0.1, 0.2, 0.3, 0.9], [1, 1, 0, 0])
    spec = EstimatorSpec.knn(3)
    grid = (np.arange(10**6) + 0.5) / 10**6
    brute = predict_many(spec, grid, s).mean()
    assert predicted_one_measure(spec, s) == pytest.approx(0.5)
    assert brute == pytest.approx(0.5, abs=1e-5)


def test_risk_examples():
    dist = DistributionSpec(1, ConstantEta(0.2))
    ones = lset([0.5], [1])
    zeros = lset([0.5], [0])
    assert exact_risk(EstimatorSpec.knn(1), ones, dist) == pytest.approx(0.8)
    assert exact_risk(EstimatorSpec.knn(1), zeros, dist) == pytest.approx(0.2)
    clean = DistributionSpec(1, ThresholdStep(0.5))
    assert exact_risk(EstimatorSpec.knn(1), lset([0.25, 0.75], [0, 1]), clean) == pytest.approx(0.0)


def test_kernel_partition_root_split():
    # score on [0, 1]: +(1 - |x - 0.2| / 0.8) near 0.2, -(1 - |x - 0.6| / 0.8) near 0.6
    s = lset([0.2, 0.6], [1, 0])
    iv = prediction_intervals(EstimatorSpec.kernel(0.4), s)
    assert len(iv) == 1 and iv[0][0] == 0.0 and iv[0][1] == pytest.approx(0.4)


def test_piecewise_risk_matches_grid():
    reg = PiecewiseContinuous(((0.0, 0.5, 0.1, 0.2), (0.5, 1.0, 0.9, -0.1)))
    dist = DistributionSpec(1, reg)
    s = lset([0.1, 0.45, 0.55, 0.8], [0, 1, 1, 1])
    spec = EstimatorSpec.knn(1)
    grid = (np.arange(200_000) + 0.5) / 200_000
    pred = predict_many(spec, grid, s)
    f = reg.f(grid)
    brute = np.mean(np.where(pred == 1, 1 - f, f))
    assert exact_risk(spec, s, dist) == pytest.approx(brute, abs=1e-5)


def test_mc_risk_agrees_with_exact():
    dist = DistributionSpec(1, ConstantEta(0.2))
    s = lset([0.2, 0.4, 0.7], [1, 0, 1])
    spec = EstimatorSpec.knn(1)
    est, se = mc_risk(spec, s, dist, 100_000, np.random.default_rng(0))
    assert abs(est - exact_risk(spec, s, dist)) < 3 * se


def test_structure_examples():
    x = np.linspace(0, 1, 6)
    v = np.full(6, -1, np.int8)
    v[[1, 2, 3]] = 0
    m = structure_from_arrays(v, [1, 2, 3], x, 1)
    assert m.intervals == [(1, 3)] and m.interior_count == 1
    assert m.interior_coverage == pytest.approx(0.2)
    xs = np.array([0.1, 0.2, 0.45, 0.7, 0.8])
    m = structure_from_arrays(np.array([0, 0, -1, 0, 0], np.int8), [0, 1, 3, 4], xs, 1)
    assert m.d_n == pytest.approx(0.5)
    full = structure_from_arrays(np.zeros(6, np.int8), list(range(6)), x, 1)
    assert full.d_n == 0 and full.interior_count == 4


def test_cell_occupancy_examples():
    s = LabeledSet.from_arrays([0.1, 0.6, 0.7], [0, 0, 0])
    assert list(cell_occupancy(s, 0.5)) == [1, 2]
    counts, measure = cell_occupancy(s, 0.5, M=0)
    assert measure == 0.0
    _, measure = cell_occupancy(s, 0.5, M=1)
    assert measure == pytest.approx(0.5)


kinds = st.sampled_from(["knn", "histogram", "kernel", "nullified"])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), kinds, st.integers(1, 40))
def test_partition_matches_grid(seed, kind, n):
    rng = np.random.default_rng(seed)
    s = LabeledSet.from_arrays(rng.random(n), (rng.random(n) < 0.4).astype(int))
    if kind == "knn":
        spec = EstimatorSpec.knn(int(rng.integers(1, min(n, 9) + 1)))
    elif kind == "nullified":
        spec = EstimatorSpec.nullified(0.25, 0.02)
    else:
        spec = EstimatorSpec(kind, h=float(rng.choice([0.5, 0.25, 0.125])))
    grid = (np.arange(100_000) + 0.5) / 100_000
    brute = predict_many(spec, grid, s).mean()
    assert predicted_one_measure(spec, s) == pytest.approx(brute, abs=2e-4)
