import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from al_lab.core import LabeledSet
from al_lab.errors import ConfigError, InsufficientDataError
from al_lab.estimators import (EstimatorSpec, estimator_weights, nullified_mask, predict, predict_many,
                               raw_weight_matrix, signed_score, signed_scores)


def lset(pairs):
    xs, ys = zip(*pairs)
    return LabeledSet.from_arrays(np.array(xs), np.array(ys))


# -- oracle examples ----------------------------------------------------------

def test_histogram_weights_example():
    s = lset([(0.1, 0), (0.2, 0), (0.6, 1)])
    w = estimator_weights(EstimatorSpec.histogram(0.25), 0.15, s)
    assert np.allclose(w.values, [0.5, 0.5, 0.0])


def test_knn_weights_example():
    s = lset([(0.2, 1), (0.8, 0)])
    assert np.allclose(estimator_weights(EstimatorSpec.knn(1), 0.3, s).values, [1.0, 0.0])


def test_nullified_weights_example():
    s = lset([(0.10, 1), (0.105, 1)])
    w = estimator_weights(EstimatorSpec.nullified(0.25, 0.01), 0.15, s)
    assert np.allclose(w.values, [0.0, 0.0])
    assert predict(EstimatorSpec.nullified(0.25, 0.01), 0.15, s) == 0


def test_knn_majority_examples():
    s = lset([(0.1, 1), (0.2, 1), (0.3, 0), (0.9, 0)])
    assert predict(EstimatorSpec.knn(3), 0.2, s) == 1
    s2 = lset([(0.4, 1), (0.6, 0), (0.95, 0)])
    assert predict(EstimatorSpec.knn(2), 0.5, s2) == 0  # needs k' = 2 ones


def test_empty_cell_predicts_zero():
    s = lset([(0.1, 1)])
    assert predict(EstimatorSpec.histogram(0.25), 0.9, s) == 0


def test_signed_score_examples():
    assert signed_score(EstimatorSpec.kernel(0.5), 0.25, lset([(0.2, 1)])) == pytest.approx(0.95)
    assert signed_score(EstimatorSpec.kernel(0.5), 0.3, lset([(0.2, 1), (0.2, 0)])) == 0.0
    s = lset([(0.1, 0), (0.2, 0), (0.6, 1)])
    assert signed_score(EstimatorSpec.histogram(0.25), 0.15, s) == -2.0


def test_knn_needs_k_entries():
    with pytest.raises(InsufficientDataError):
        predict(EstimatorSpec.knn(3), 0.5, lset([(0.1, 1), (0.2, 0)]))


@pytest.mark.parametrize("kw", [dict(kind="knn", k=0), dict(kind="histogram", h=0.0),
                                dict(kind="nullified", h=0.1, r_null=0.2), dict(kind="nope", h=0.1),
                                dict(kind="kernel", h=0.1, tie_rule="coin")])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        EstimatorSpec(**kw)


def test_knn_tie_prefers_smaller_coordinate_then_earlier_step():
    s = lset([(0.6, 1), (0.4, 0)])
    assert np.allclose(estimator_weights(EstimatorSpec.knn(1), 0.5, s).values, [0.0, 1.0])
    same = LabeledSet.from_arrays([0.4, 0.4], [1, 0])
    assert np.allclose(estimator_weights(EstimatorSpec.knn(1), 0.5, same).values, [1.0, 0.0])


def test_fair_coin_consumes_one_draw_per_tie():
    spec = EstimatorSpec.kernel(0.5, tie_rule="fair-coin")
    s = lset([(0.2, 1), (0.2, 0)])
    rng = np.random.default_rng(3)
    out = predict_many(spec, np.array([0.3, 0.4, 0.9]), s, rng)
    ref = np.random.default_rng(3)
    expected = [int(ref.random() < 0.5), int(ref.random() < 0.5), 0 if True else None]
    # 0.9 lies outside every support: the score is 0, so it is a tie as well
    expected[2] = int(ref.random() < 0.5)
    assert list(out) == expected


def test_one_sided_nullification_keeps_first():
    coords = np.array([[0.10], [0.105], [0.5]])
    assert list(nullified_mask(coords, 0.01, np.array([1, 2, 3]), "one-sided")) == [False, True, False]
    assert list(nullified_mask(coords, 0.01, np.array([1, 2, 3]), "mutual")) == [True, True, False]


# -- properties -------------------------------------------------------------

points = st.lists(st.tuples(st.floats(0, 1, allow_nan=False), st.integers(0, 1)), min_size=1, max_size=30)
specs = st.one_of(
    st.builds(EstimatorSpec.knn, st.integers(1, 5)),
    st.builds(EstimatorSpec.histogram, st.sampled_from([0.5, 0.25, 0.125, 0.3])),
    st.builds(EstimatorSpec.kernel, st.floats(0.05, 1.0)),
    st.builds(EstimatorSpec.nullified, st.sampled_from([0.5, 0.25]), st.sampled_from([0.001, 0.01])),
)


@settings(max_examples=150, deadline=None)
@given(points, specs, st.floats(0, 1))
def test_weights_normalise_or_vanish(pairs, spec, x):
    assume(spec.kind != "knn" or len(pairs) >= spec.k)
    w = estimator_weights(spec, x, lset(pairs))
    assert np.all(w.values >= 0)
    assert w.total == pytest.approx(1.0) or w.total == 0.0
    if spec.kind == "knn":
        assert w.total == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(points, st.integers(1, 5), st.floats(0, 1), st.randoms(use_true_random=False))
def test_knn_prediction_invariant_under_permutation(pairs, k, x, rnd):
    pairs = list({p[0]: p for p in pairs}.values())  # distinct coordinates
    assume(len(pairs) >= k)
    spec = EstimatorSpec.knn(k)
    before = predict(spec, x, lset(pairs))
    rnd.shuffle(pairs)
    assert predict(spec, x, lset(pairs)) == before


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1.0), st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0, 1))
def test_kernel_weight_range(h, xs, x):
    w = raw_weight_matrix(EstimatorSpec.kernel(h), x, np.array(xs)[:, None])[0]
    d = np.abs(np.array(xs) - x)
    assert np.all((w == 0) | ((w >= 0.5) & (w <= 1.0)))
    assert np.all(w[d > h] == 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=20, unique=True), st.lists(st.integers(0, 1),
       min_size=20, max_size=20), st.floats(0, 1))
def test_nullified_equals_histogram_for_spread_points(slots, labels, x):
    xs = np.array(slots) / 50.0  # spacing >= 0.02 > r_null
    s = LabeledSet.from_arrays(xs, labels[: len(xs)])
    h = 0.25
    a = predict(EstimatorSpec.nullified(h, 0.01), x, s)
    b = predict(EstimatorSpec.histogram(h), x, s)
    assert a == b


@settings(max_examples=60, deadline=None)
@given(points, specs, st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_vectorised_scores_match_weights(pairs, spec, queries):
    assume(spec.kind != "knn" or len(pairs) >= spec.k)
    s = lset(pairs)
    vec = signed_scores(spec, np.array(queries), s)
    direct = raw_weight_matrix(spec, np.array(queries), s.coords, s.steps) @ (2.0 * s.labels - 1.0)
    assert np.allclose(vec, direct)


def test_two_dimensional_weights():
    s = LabeledSet.from_arrays(np.array([[0.1, 0.1], [0.15, 0.2], [0.9, 0.9]]), [1, 1, 0])
    w = estimator_weights(EstimatorSpec.histogram(0.5), np.array([0.2, 0.2]), s)
    assert np.allclose(w.values, [0.5, 0.5, 0.0])
    assert predict(EstimatorSpec.knn(1), np.array([0.8, 0.8]), s) == 0
