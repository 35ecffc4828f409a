import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclesurv.errors import ConfigError, DomainError
from cyclesurv.schedule import (
    AdherenceConfig,
    InfusionSchedule,
    ScheduleBatch,
    generate_schedule,
    intervals,
    schedules_from_uniforms,
)


def test_perfect_adherence_grid():
    s = generate_schedule(AdherenceConfig(), 10, np.random.default_rng(3))
    assert s.times == tuple(56.0 * k for k in range(10))
    assert s.study_end == 560.0


def test_perfect_adherence_ignores_seed():
    a = [generate_schedule(AdherenceConfig(), 10, np.random.default_rng(i)) for i in range(5)]
    assert all(x == a[0] for x in a)


def test_miss_prob_bounds():
    with pytest.raises(ConfigError):
        AdherenceConfig(miss_prob=1.0)
    with pytest.raises(ConfigError):
        AdherenceConfig(window_low=1.0, window_high=2.0)
    with pytest.raises(ConfigError):
        AdherenceConfig(discontinue_prob=-0.1)


def test_intervals():
    assert intervals(InfusionSchedule((0, 56, 112), 168)) == (56, 56, 56)
    assert intervals(InfusionSchedule((0, 120), 560)) == (120, 440)
    assert intervals(InfusionSchedule((0,), 560)) == (560,)


def test_schedule_invariants_enforced():
    with pytest.raises(DomainError):
        InfusionSchedule((5.0, 10.0), 100)
    with pytest.raises(DomainError):
        InfusionSchedule((0.0, 10.0, 10.0), 100)
    with pytest.raises(DomainError):
        InfusionSchedule((0.0, 200.0), 100)


def test_missed_visit_fraction():
    cfg = AdherenceConfig(miss_prob=0.10)
    u = np.random.default_rng(11).random((100_000, 27))
    batch = schedules_from_uniforms(cfg, 10, u)
    realized = (batch.counts - 1).sum() / (9 * len(batch))
    assert realized == pytest.approx(0.90, abs=0.005)


def test_missed_visits_keep_target_grid():
    u = np.full((1, 27), 0.5)
    u[0, 3 * 1 + 1] = 0.0  # visit 3 (day 112) missed
    batch = schedules_from_uniforms(AdherenceConfig(miss_prob=0.1), 10, u)
    s = batch.schedule(0)
    assert 112.0 not in s.times
    assert s.times[:3] == (0.0, 56.0, 168.0)


def test_discontinuation_stops_visits():
    u = np.full((1, 27), 0.5)
    u[0, 3 * 4] = 0.0  # discontinue at visit 6
    s = schedules_from_uniforms(AdherenceConfig(discontinue_prob=0.05), 10, u).schedule(0)
    assert s.times == (0.0, 56.0, 112.0, 168.0, 224.0)


def test_mean_count_monotone_in_miss_prob():
    u = np.random.default_rng(5).random((10_000, 27))
    means = [schedules_from_uniforms(AdherenceConfig(miss_prob=p), 10, u).counts.mean() for p in (0, 0.02, 0.1, 0.3)]
    assert all(a >= b for a, b in zip(means, means[1:]))


def test_batch_roundtrip():
    scheds = [InfusionSchedule((0, 56), 560), InfusionSchedule((0,), 560)]
    batch = ScheduleBatch.from_schedules(scheds)
    assert [batch.schedule(i) for i in range(2)] == scheds


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.0, 0.9),
    st.floats(-7.0, 0.0),
    st.floats(0.0, 49.0),
    st.floats(0.0, 0.3),
    st.integers(1, 10),
    st.integers(0, 2**32 - 1),
)
def test_generated_schedules_valid(miss, lo, hi, disc, m, seed):
    cfg = AdherenceConfig(miss, lo, hi, disc)
    s = generate_schedule(cfg, m, np.random.default_rng(seed))
    assert s.times[0] == 0.0
    assert all(b > a for a, b in zip(s.times, s.times[1:]))
    assert 1 <= s.m <= m
    assert sum(intervals(s)) == pytest.approx(s.study_end)
