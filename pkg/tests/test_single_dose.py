import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from cyclesurv.covariate import EffectModel, SubjectCovariates
from cyclesurv.errors import DomainError
from cyclesurv.hazard import BaselineHazard
from cyclesurv.oracle import HazardPath, cumulative_hazard, invert
from cyclesurv.schedule import InfusionSchedule, ScheduleBatch
from cyclesurv.single_dose import (
    aggregate_batch,
    aggregate_multidose,
    draw_exponential,
    draw_gompertz,
    draw_weibull,
    exponential_time,
    neglog_uniform,
    single_dose_time,
    weibull_integral,
    weibull_time,
)

EM = EffectModel(0.03, 57.0)
NONE = SubjectCovariates()


def u_of(E):
    return float(np.exp(-E))


# expected times below were produced by the quadrature + root-finding oracle
def test_exponential_examples():
    d = draw_exponential(EM, NONE, 1e-4, u_of(0.001))
    assert d.time == pytest.approx(8.745475482249702, abs=1e-6)
    assert not d.post_threshold
    d = draw_exponential(EM, NONE, 1e-4, u_of(0.03))
    assert d.time == pytest.approx(83.95526420570737, abs=1e-6)
    assert d.post_threshold


def test_threshold_quantity():
    # (lam / beta) (e^{beta t_s} - 1) for lam=1e-4, beta=0.03, t_s=57
    B = 1e-4 / 0.03 * (np.exp(1.71) - 1)
    assert B == pytest.approx(0.015097, abs=1e-6)
    assert not exponential_time(np.nextafter(B, 0), 1e-4, 0.03, 57.0)[1]
    assert exponential_time(B, 1e-4, 0.03, 57.0)[1]


def test_zero_target_gives_zero_time():
    for fn in (
        lambda E: exponential_time(E, 1e-4, 0.03, 57.0),
        lambda E: weibull_time(E, 1e-4, 1.5, 0.03, 57.0),
        lambda E: exponential_time(E, 1e-4, 0.035, 57.0),
    ):
        assert fn(0.0)[0] == 0.0
    assert draw_exponential(EM, NONE, 1e-4, 1.0).time == pytest.approx(0.0, abs=1e-9)


def test_weibull_example():
    d = draw_weibull(EM, NONE, 1e-4, 1.5, u_of(0.005))
    assert d.time == pytest.approx(11.753622751716122, abs=1e-6)


def test_gompertz_example():
    d = draw_gompertz(EM, NONE, 1e-4, 0.005, u_of(0.001))
    # (1 / 0.035) log(1 + 0.035 * 0.001 / 1e-4)
    assert d.time == pytest.approx(np.log(1.35) / 0.035, abs=1e-9)
    assert d.time == pytest.approx(8.574416927152518, abs=1e-6)


def test_gompertz_singular_slope():
    em = EffectModel(0.03, 57.0)
    d = draw_gompertz(em, NONE, 1e-4, -0.03, u_of(0.001))
    assert d.time == pytest.approx(0.001 / 1e-4, rel=1e-12)
    d = draw_gompertz(em, NONE, 1e-4, -0.03 + 1e-12, u_of(0.001))
    assert d.time == pytest.approx(10.0, rel=1e-9)


def test_beta_zero_limit():
    em = EffectModel(0.0, 57.0)
    assert draw_exponential(em, NONE, 1e-3, u_of(0.5)).time == pytest.approx(500.0, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-5, 1e-2), st.floats(-0.05, 0.08), st.floats(5.0, 120.0), st.floats(1e-6, 5.0))
def test_weibull_shape_one_is_exponential(lam, beta, t_s, E):
    a = weibull_time(E, lam, 1.0, beta, t_s)[0]
    b = exponential_time(E, lam, beta, t_s)[0]
    assert a == pytest.approx(b, abs=1e-9, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-5, 1e-2), st.floats(-0.05, 0.08), st.floats(5.0, 120.0), st.floats(1e-6, 5.0))
def test_gompertz_alpha_zero_is_exponential(lam, beta, t_s, E):
    em = EffectModel(beta, t_s)
    u = u_of(E)
    assert draw_gompertz(em, NONE, lam, 0.0, u).time == pytest.approx(
        draw_exponential(em, NONE, lam, u).time, abs=1e-12, rel=1e-12
    )


@pytest.mark.parametrize("gamma", [0.4, 0.7, 1.0, 1.5, 3.0])
@pytest.mark.parametrize("beta", [0.05, 0.0, -0.02, -0.1])
@pytest.mark.parametrize("t", [0.1, 10.0, 57.0, 81.0])
def test_weibull_integral_against_independent_routes(gamma, beta, t):
    got = weibull_integral(t, gamma, beta)
    if beta < 0:
        ref = (-beta) ** (-gamma) * gamma_fn(gamma) * gammainc(gamma, -beta * t)
    else:
        ref = quad(lambda v: v ** (gamma - 1) * np.exp(beta * v), 0, t, epsabs=0, epsrel=1e-13, limit=200)[0]
    assert got == pytest.approx(ref, rel=1e-10)


def test_boundary_continuity():
    cases = [
        (BaselineHazard.exponential(1e-4), EffectModel(0.03, 57.0)),
        (BaselineHazard.exponential(1e-3), EffectModel(-0.02, 81.0)),
        (BaselineHazard.weibull(1e-4, 1.5), EffectModel(0.03, 57.0)),
        (BaselineHazard.weibull(1e-4, 0.7), EffectModel(-0.02, 57.0)),
        (BaselineHazard.gompertz(1e-4, 0.005), EffectModel(0.03, 57.0)),
        (BaselineHazard.gompertz(1e-4, -0.03), EffectModel(0.03, 57.0)),
    ]
    for base, em in cases:
        B = cumulative_hazard(HazardPath(base, em), em.t_s)
        left = single_dose_time(base, em, B * (1 - 1e-14))[0]
        right = single_dose_time(base, em, B * (1 + 1e-14))[0]
        assert abs(left - em.t_s) <= 1e-9 and abs(right - em.t_s) <= 1e-9


families = st.sampled_from(["exp", "weibull", "gompertz"])


@settings(max_examples=60, deadline=None)
@given(
    families,
    st.floats(1e-5, 1e-3),
    st.floats(-0.04, 0.06),
    st.floats(0.5, 3.0),
    st.floats(-0.02, 0.02),
    st.floats(20.0, 100.0),
    st.floats(-1.0, 1.0),
    st.floats(1e-4, 3.0),
)
def test_oracle_equivalence_property(fam, lam, beta, gamma, alpha, t_s, lp, frac):
    base = {
        "exp": BaselineHazard.exponential(lam),
        "weibull": BaselineHazard.weibull(lam, gamma),
        "gompertz": BaselineHazard.gompertz(lam, alpha),
    }[fam]
    em = EffectModel(beta, t_s, (1.0,))
    sc = SubjectCovariates((lp,))
    path = HazardPath(base, em, sc)
    E = frac * cumulative_hazard(path, t_s)
    T = float(single_dose_time(base, em, E, lp)[0])
    assert T == pytest.approx(invert(path, E, censor=False), abs=1e-6)
    assert cumulative_hazard(path, T) == pytest.approx(E, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-0.05, 0.05), st.lists(st.floats(0.0, 5.0), min_size=2, max_size=20))
def test_monotone_in_target(gamma, beta, Es):
    E = np.sort(np.array(Es))
    for T in (weibull_time(E, 1e-3, gamma, beta, 57.0)[0], exponential_time(E, 1e-3, beta, 57.0)[0]):
        assert np.all(np.diff(T) >= -1e-12)


def test_uniform_domain():
    for bad in (-0.1, 1.5, np.nan):
        with pytest.raises(DomainError):
            neglog_uniform(bad)
    assert np.isfinite(neglog_uniform(0.0))
    assert neglog_uniform(1.0) >= 0


class _Forced:
    def __init__(self, values):
        self.values = list(values)

    def __call__(self, u):
        return self.values.pop(0)


def test_aggregate_forced_event():
    sched = InfusionSchedule((0.0, 56.0, 112.0), 168.0)
    out = aggregate_multidose(sched, _Forced([70.0, 10.0, 5.0]), np.random.default_rng(0))
    assert out.event and out.time == 66.0 and out.cycle == 2


def test_aggregate_forced_censored():
    sched = InfusionSchedule.perfect()
    I = np.diff(np.append(sched.times, sched.study_end))
    out = aggregate_multidose(sched, _Forced(I + 1), np.random.default_rng(0))
    assert not out.event and out.time == 560.0


def test_aggregate_tie_is_censored_within_interval():
    sched = InfusionSchedule((0.0, 56.0), 112.0)
    out = aggregate_multidose(sched, _Forced([56.0, 56.0]), np.random.default_rng(0))
    assert not out.event


def test_aggregate_single_dose():
    out = aggregate_multidose(InfusionSchedule((0.0,), 560.0), _Forced([30.0]), np.random.default_rng(0))
    assert out.event and out.time == 30.0


def test_aggregation_is_memoryless():
    n = 100_000
    lam = 2e-3
    rng = np.random.default_rng(42)
    batch = ScheduleBatch.from_schedules([InfusionSchedule.perfect()] * n)
    T, _ = exponential_time(-np.log(rng.random((n, 10))), lam, 0.03, 57.0)
    time, event, cycle = aggregate_batch(batch, T)
    survived_1 = ~(event & (cycle == 1))
    p_cond = np.mean(event[survived_1] & (cycle[survived_1] == 2))
    # single-dose probability of an event within 56 days, by quadrature
    p_single = 1 - np.exp(-quad(lambda t: lam * np.exp(0.03 * t), 0, 56)[0])
    se = np.sqrt(p_single * (1 - p_single) / survived_1.sum())
    assert abs(p_cond - p_single) < 3 * se
