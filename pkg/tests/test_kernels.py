"""The compiled kernels must agree with the numpy fallback."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from al_lab import _fallback, kernels
from al_lab.core import LabeledSet
from al_lab.estimators import EstimatorSpec, raw_weight_matrix

compiled = pytest.importorskip("al_lab._kernels")


def test_backend_selected():
    assert kernels.BACKEND == "cython"


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 60), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_knn_scores_agree(n, k, seed):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    xs = np.sort(rng.random(n))
    signs = np.where(rng.random(n) < 0.4, 1.0, -1.0)
    q = np.concatenate([rng.random(50), xs, [0.0, 1.0]])
    assert np.array_equal(compiled.knn_scores_1d(xs, signs, k, q), _fallback.knn_scores_1d(xs, signs, k, q))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from([-1, -1, 0, 1, 1]), min_size=1, max_size=80), st.integers(1, 4))
def test_open_scan_agrees(view, kprime):
    v = np.array(view, dtype=np.int8)
    assert np.array_equal(compiled.scan_open_points(v, kprime), _fallback.scan_open_points(v, kprime))


@pytest.mark.parametrize("code, k, h, rnull, mutual", [
    (_fallback.KNN, 2, 1.0, 0.0, True),
    (_fallback.HIST, 0, 0.25, 0.0, True),
    (_fallback.KERNEL, 0, 0.2, 0.0, True),
    (_fallback.NULLIFIED, 0, 0.25, 0.01, True),
    (_fallback.NULLIFIED, 0, 0.25, 0.01, False),
])
def test_gn_min_agrees(code, k, h, rnull, mutual):
    rng = np.random.default_rng(code)
    for _ in range(10):
        lattice = np.unique(np.concatenate([np.linspace(0, 1, 24), rng.random(6)]))
        fixed = rng.random(2) * 0.2 + 0.2
        x, r = np.array([0.3]), 0.15
        a = compiled.gn_min_1d(fixed, lattice, 2, code, k, h, rnull, mutual, 0.3, r)
        b = _fallback.gn_min(fixed[:, None], lattice[:, None], 2, code, k, h, rnull, mutual, x, r)
        assert a[0] == pytest.approx(b[0], abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.sampled_from([-1.0, 1.0])), min_size=1, max_size=12),
       st.integers(1, 6), st.integers(0, 8))
def test_knn_scores_with_duplicate_coordinates(entries, k, qslot):
    k = min(k, len(entries))
    xs = np.array([e[0] / 4 for e in entries])
    signs = np.array([e[1] for e in entries])
    order = np.lexsort((np.arange(len(xs)), xs))  # coordinate, then step
    q = np.array([qslot / 8])
    s = LabeledSet.from_arrays(xs, (signs > 0).astype(int))
    direct = raw_weight_matrix(EstimatorSpec.knn(k), q, s.coords, s.steps) @ signs
    for mod in (compiled, _fallback):
        assert mod.knn_scores_1d(xs[order], signs[order], k, q)[0] == direct[0]
