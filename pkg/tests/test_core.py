import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from al_lab.core import (ConstantEta, DistributionSpec, LabeledSet, PiecewiseContinuous, ScheduleSpec,
                         ThresholdStep, bayes_risk, build_pool, schedule_diagnostics)
from al_lab.errors import ConfigError
from al_lab.rng import RngContract, make_stream, tag_key


def test_pool_size_follows_square_rule():
    dist = DistributionSpec(1, ConstantEta(0.2))
    pool = build_pool(10, dist, ScheduleSpec(), np.random.default_rng(0))
    assert pool.m == 100
    assert np.all(np.diff(pool.x) > 0)
    assert np.all(pool.revealed == -1)


def test_threshold_labels_are_deterministic():
    reg = ThresholdStep(0.5)
    assert reg.f(np.array([0.7]))[0] == 1.0
    pool = build_pool(30, DistributionSpec(1, reg), ScheduleSpec(), np.random.default_rng(1))
    assert np.array_equal(pool.labels, (pool.x > 0.5).astype(np.uint8))


def test_pool_label_fraction():
    m = 40_000
    dist = DistributionSpec(1, ConstantEta(0.2))
    pool = build_pool(200, dist, ScheduleSpec(m="linear:200"), np.random.default_rng(7))
    assert pool.m == m
    frac = pool.labels.mean()
    assert abs(frac - 0.2) <= 3 * math.sqrt(0.2 * 0.8 / m)


def test_pool_rejects_dimension_mismatch():
    with pytest.raises(ConfigError):
        build_pool(10, DistributionSpec(2, ConstantEta(0.2)), ScheduleSpec(d=1), np.random.default_rng(0))


def test_pool_reveal_once():
    pool = build_pool(4, DistributionSpec(1, ConstantEta(0.3)), ScheduleSpec(), np.random.default_rng(0))
    y = pool.reveal(3)
    assert pool.revealed[3] == y
    with pytest.raises(ValueError):
        pool.reveal(3)


@pytest.mark.parametrize("reg, expected", [
    (ConstantEta(0.2), 0.2),
    (ThresholdStep(0.5), 0.0),
    (PiecewiseContinuous(((0.0, 1.0, 0.0, 0.4),)), 0.2),
])
def test_bayes_risk_examples(reg, expected):
    assert bayes_risk(DistributionSpec(1, reg)) == pytest.approx(expected, abs=1e-12)


def test_schedule_examples():
    sched = ScheduleSpec()
    assert sched.s(4) == pytest.approx(25 / 12)
    assert sched.k_at(100) == 1
    assert sched.k_at(1618) == 1 and sched.k_at(1619) == 2
    growth = [schedule_diagnostics(sched, n)["hd_s"] for n in (100, 800, 3200)]
    assert growth[-1] > 1 and growth == sorted(growth)
    assert growth[-1] == pytest.approx(math.sqrt(sched.s(3200)))


def test_schedule_diagnostics_clean_for_defaults():
    rep = schedule_diagnostics(ScheduleSpec(), 5000)
    assert rep["violations"] == []
    assert rep["k_over_s"] < 1


@pytest.mark.parametrize("field, value", [("p", "bogus"), ("k", "const:0"), ("h", "const:2"),
                                          ("m", "linear"), ("p", "const:1.5")])
def test_schedule_rejects_bad_rules(field, value):
    with pytest.raises(ConfigError):
        ScheduleSpec(**{field: value})


def test_labeled_set_roundtrip():
    s = LabeledSet.from_arrays([0.3, 0.1], [1, 0])
    assert len(s) == 2
    assert list(s.x) == [0.3, 0.1]
    assert list(s.steps) == [1, 2]
    with pytest.raises(ValueError):
        s.append([0.5], 1, "random", 1)  # out of step order
    c = s.copy()
    c.append([0.5], 0, "active", 3)
    assert len(s) == 2 and len(c) == 3 and list(c.z) == [1, 1, 0]


def test_rng_streams_are_tagged_and_reproducible():
    a = make_stream(5, 0, "z").random(4)
    assert np.array_equal(a, make_stream(5, 0, "z").random(4))
    assert not np.array_equal(a, make_stream(5, 1, "z").random(4))
    assert not np.array_equal(a, make_stream(5, 0, "pick").random(4))
    assert tag_key("z") == tag_key("z")
    streams = RngContract(5).streams(0)
    assert set(streams) == {"z", "pick", "base", "synth", "tie", "eval"}


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 500))
def test_partial_sums_match_direct(n):
    sched = ScheduleSpec()
    assert sched.s(n) == pytest.approx(math.fsum(1.0 / i for i in range(1, n + 1)), rel=1e-12)
