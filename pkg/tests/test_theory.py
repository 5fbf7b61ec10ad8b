import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from al_lab.core import ConstantEta, DistributionSpec, ScheduleSpec
from al_lab.errors import BudgetError, ConfigError, CouplingViolation, PreconditionError
from al_lab.estimators import EstimatorSpec
from al_lab.theory import (GnInstance, RaceSpec, check_bounded_sup, estimate_condition1, expected_uprime,
                           gn_direct, gn_oracle, gn_search, majority_bound_mc, majority_error, race_mc,
                           race_recursion, run_survival, uprime_increment, uprime_sim)

HIST = EstimatorSpec.histogram(0.25)
NULL = EstimatorSpec.nullified(0.25, 0.01)


# -- g_n ---------------------------------------------------------------------

def test_gn_histogram_cell_inside_ball():
    assert gn_oracle(GnInstance(HIST, 0.1, 0.3, (((0.05,), 1),), 2, 32)) == 1.0


def test_gn_nullified_adversary_wins():
    assert gn_oracle(GnInstance(NULL, 0.1, 0.3, (((0.05,), 1),), 1, 32)) == 0.0


def test_gn_knn_enough_e_points():
    inst = GnInstance(EstimatorSpec.knn(2), 0.42, 0.1, (((0.40,), 1), ((0.45,), 1)), 2, 32)
    assert gn_oracle(inst) == 1.0


def test_gn_placement_realises_value():
    inst = GnInstance(EstimatorSpec.kernel(0.3), 0.5, 0.1, (((0.52,), 1),), 1, 48)
    val, placement = gn_search(inst)
    pts = np.concatenate([[[0.52]], placement])
    assert gn_direct(inst.spec, 0.5, 0.1, pts) == pytest.approx(val)
    assert 0.0 < val < 1.0


def test_gn_budget():
    with pytest.raises(BudgetError):
        gn_oracle(GnInstance(HIST, 0.1, 0.3, (((0.05,), 1),), 4, 256))


def test_gn_rejects_e_point_outside_ball():
    with pytest.raises(ConfigError):
        GnInstance(HIST, 0.1, 0.05, (((0.5,), 1),), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["knn", "histogram", "kernel", "nullified"]))
def test_gn_adversaries_only_lower_the_infimum(seed, kind):
    rng = np.random.default_rng(seed)
    spec = EstimatorSpec.knn(1) if kind == "knn" else (NULL if kind == "nullified" else EstimatorSpec(kind, h=0.25))
    x, r = float(rng.uniform(0.2, 0.8)), 0.15
    e = tuple(((float(x + rng.uniform(-r, r)),), 1) for _ in range(2))
    one = gn_oracle(GnInstance(spec, x, r, e, 1, 16))
    two = gn_oracle(GnInstance(spec, x, r, e, 2, 16))
    assert two <= one + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["knn", "histogram", "kernel"]))
def test_gn_more_e_points_never_hurt(seed, kind):
    rng = np.random.default_rng(seed)
    spec = EstimatorSpec.knn(1) if kind == "knn" else EstimatorSpec(kind, h=0.25)
    x, r = float(rng.uniform(0.2, 0.8)), 0.15
    e = [((float(x + rng.uniform(-r, r)),), 1) for _ in range(3)]
    few = gn_oracle(GnInstance(spec, x, r, tuple(e[:2]), 1, 16))
    more = gn_oracle(GnInstance(spec, x, r, tuple(e), 1, 16))
    assert more >= few - 1e-12


def test_condition1_knn_with_h_equal_k_is_one():
    sched = ScheduleSpec(H="k")
    dist = DistributionSpec(1, ConstantEta(0.2))
    est = estimate_condition1(EstimatorSpec.knn(1), dist, sched, 400, 0.2, 30, np.random.default_rng(0))
    assert est.mean == 1.0 and np.all(est.values == 1.0)


def test_condition1_nullified_below_histogram():
    sched = ScheduleSpec()
    dist = DistributionSpec(1, ConstantEta(0.2))
    h = sched.h_at(400)
    rng = np.random.default_rng(1)
    hist = estimate_condition1(EstimatorSpec.histogram(h), dist, sched, 400, 0.45, 20, rng, adv_cap=1, grid=16)
    null = estimate_condition1(EstimatorSpec.nullified(h, h / 100), dist, sched, 400, 0.45, 20, rng,
                               adv_cap=1, grid=16)
    assert null.mean < hist.mean


def test_bounded_sup_report():
    rep = check_bounded_sup("kernel", ScheduleSpec(), [100, 1000, 10_000], 200, np.random.default_rng(0))
    assert rep.ok, rep.violations
    assert all(r.max_weight <= 1.0 for r in rep.rows)
    hist = check_bounded_sup("histogram", ScheduleSpec(), [100, 1000], 50, np.random.default_rng(0))
    assert hist.rows[1].diameter < hist.rows[0].diameter


# -- races ---------------------------------------------------------------------

def test_run_survival_matches_enumeration():
    eta, kp, t = 0.3, 2, 8
    q = run_survival(eta, kp, t)
    for n in range(t + 1):
        total = 0.0
        for bits in range(2**n):
            ys = [(bits >> i) & 1 for i in range(n)]
            run = any(all(ys[j + a] for a in range(kp)) for j in range(n - kp + 1))
            if not run:
                total += math.prod(eta if y else 1 - eta for y in ys)
        assert q[n] == pytest.approx(total, abs=1e-12)


def test_race_example_k1():
    res = race_mc(RaceSpec(100, 0.2, 1), np.random.default_rng(0))
    assert res.bound_less == pytest.approx((1 / 101) / 0.2)
    assert res.ok


def test_race_monotone_in_start():
    rng = np.random.default_rng(4)
    a = race_mc(RaceSpec(100, 0.2, 1), rng)
    b = race_mc(RaceSpec(10_000, 0.2, 1), rng)
    assert b.p_less < a.p_less and b.p_equal < a.p_equal


def test_race_needs_enough_draws():
    with pytest.raises(ConfigError):
        RaceSpec(10, 0.2, mc_draws=100)


def test_recursion_examples():
    tab = race_recursion(0.01, a=3, b=4)
    assert tab.closed[1, 3] == pytest.approx(3**6 * 1e-4)
    assert tab.table[0, 2] <= 3 * 0.01
    assert tab.table[2, 0] == pytest.approx(1e-6)
    assert tab.ok


# -- U' ------------------------------------------------------------------------

def test_expected_uprime_example():
    assert expected_uprime(0.01, 0.2) == pytest.approx(-0.182)


def test_uprime_increments():
    assert uprime_increment(1, 0, 1, 5, None, None) == 2
    assert uprime_increment(0, 1, 1, 5, None, None) == -1
    assert uprime_increment(0, 0, 1, 5, None, None) == 0
    z = [None, 0, 0, 0, 0]
    y = [None, 0, 1, 1, 1]
    assert uprime_increment(0, 1, 2, 4, z, y) == -1


def test_uprime_coupling_k1():
    res = uprime_sim(ScheduleSpec(), 0.2, 1, 2000, 3, seed=1)
    assert res.violations == [] and res.checked_steps > 0


def test_uprime_strict_raises_with_trace():
    res = uprime_sim(ScheduleSpec(), 0.2, 2, 3000, 4, seed=0)
    if not res.violations:
        pytest.skip("no violation in this sample")
    with pytest.raises(CouplingViolation) as info:
        uprime_sim(ScheduleSpec(), 0.2, 2, 3000, 4, seed=0, strict=True)
    assert info.value.trace["step"] == res.violations[0][1]


# -- majority vote -------------------------------------------------------------

def test_majority_examples():
    assert majority_error([0.25], 0.2) == pytest.approx(0.35)
    res = majority_bound_mc(1, 0.05, 0.2)
    assert res.worst == pytest.approx(0.35) and res.bound == pytest.approx(0.45)
    nine = majority_bound_mc(9, 0.05, 0.2)
    assert nine.bound == pytest.approx(0.2 + 2 / 3) and nine.ok


def test_majority_eps_zero_is_binomial():
    from scipy.stats import binom
    k, eta = 5, 0.2
    p_one = binom.sf(k // 2, k, eta)
    expected = eta * (1 - p_one) + (1 - eta) * p_one
    assert majority_bound_mc(k, 0.0, eta).worst == pytest.approx(expected)


def test_majority_precondition():
    with pytest.raises(PreconditionError):
        majority_bound_mc(3, 0.2, 0.2)
