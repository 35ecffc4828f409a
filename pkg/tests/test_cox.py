import numpy as np
import pytest

from cox_fixtures import FIXTURES, grid_argmax, naive_loglik
from cyclesurv.cox import (
    CountingProcessRow as R,
    expand_counting_process,
    fit,
    fit_risk_sets,
    log_partial_likelihood,
    read_rows_csv,
    risk_sets_from_rows,
    risk_sets_from_schedules,
    write_rows_csv,
)
from cyclesurv.errors import DomainError, SeparationError
from cyclesurv.outcome import SubjectOutcome
from cyclesurv.schedule import AdherenceConfig, InfusionSchedule, ScheduleBatch
from cyclesurv.trial import ArmSpec, TrialConfig, run_trial


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_loglik_matches_enumeration(name):
    rows = FIXTURES[name]
    rs = risk_sets_from_rows(rows)
    for b in (-0.7, 0.0, 0.3):
        assert log_partial_likelihood(rs, [b])[0] == pytest.approx(naive_loglik(rows, b), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_newton_matches_grid_search(name):
    rows = FIXTURES[name]
    res = fit(rows)
    assert res.converged
    assert abs(res.beta_hat - grid_argmax(rows)) <= 1e-3
    assert np.all(np.diff(res.trace) >= 0)


def test_gradient_and_hessian_by_differences():
    rs = risk_sets_from_rows(FIXTURES["time_varying"])
    b, h = 0.02, 1e-5
    ll, g, H = log_partial_likelihood(rs, [b])
    lp, gp, _ = log_partial_likelihood(rs, [b + h])
    lm, gm, _ = log_partial_likelihood(rs, [b - h])
    assert g[0] == pytest.approx((lp - lm) / (2 * h), rel=1e-6)
    assert H[0, 0] == pytest.approx((gp[0] - gm[0]) / (2 * h), rel=1e-6)


def test_location_invariance():
    rows = FIXTURES["late_entry"]
    shifted = [R(r.subject_id, r.t_start, r.t_stop, r.event, r.z + 17.0) for r in rows]
    assert fit(shifted).beta_hat == pytest.approx(fit(rows).beta_hat, abs=1e-9)


def test_no_variation():
    rows = [R(i, 0.0, 10.0 + i, True, 3.0) for i in range(5)]
    with pytest.raises(DomainError):
        fit(rows)


def test_no_events():
    with pytest.raises(DomainError):
        fit([R(0, 0.0, 5.0, False, 1.0), R(1, 0.0, 6.0, False, 0.0)])


def test_separation():
    # every event has the largest z in its risk set
    rows = [R(0, 0.0, 1.0, True, 3.0), R(1, 0.0, 2.0, True, 2.0), R(2, 0.0, 3.0, False, 1.0)]
    with pytest.raises(SeparationError):
        fit(rows)


def test_expansion_example():
    rows = expand_counting_process(
        [SubjectOutcome(66.0, True, 2)], [InfusionSchedule((0.0, 56.0, 112.0), 560.0)], step=None
    )
    assert [(r.t_start, r.t_stop, r.event, r.z) for r in rows] == [(0.0, 56.0, False, 0.0), (56.0, 66.0, True, 0.0)]


def test_expansion_rows_partition_follow_up():
    sched = InfusionSchedule((0.0, 60.0, 130.0), 300.0)
    out = SubjectOutcome(200.5, True, 3)
    rows = expand_counting_process([out], [sched], "clamped", t_s=57.0, step=1.0)
    assert rows[0].t_start == 0.0 and rows[-1].t_stop == 200.5
    assert all(a.t_stop == b.t_start for a, b in zip(rows, rows[1:]))
    assert sum(r.event for r in rows) == 1 and rows[-1].event
    assert max(r.z for r in rows) == 57.0
    assert rows[-1].z == 57.0 and rows[-1].t_start == 200.0


def test_csv_round_trip(tmp_path):
    rows = [R(i, r.t_start, r.t_stop, r.event, r.z + 1 / 3, (0.1 * i, -2.0)) for i, r in enumerate(FIXTURES["late_entry"])]
    path = tmp_path / "rows.csv"
    write_rows_csv(rows, path)
    assert read_rows_csv(path) == rows


def _small_trial(window=(-7.0, 49.0), beta=0.03, n=600, rate=0.2, seed=5, eta=(), x_mean=(), x_sd=()):
    cfg = TrialConfig(
        arms=(ArmSpec("low", n, 57.0),),
        annual_rate=rate,
        beta=beta,
        eta=eta,
        x_mean=x_mean,
        x_sd=x_sd,
        adherence=AdherenceConfig(0.05, *window),
        master_seed=seed,
        fit=False,
    )
    return run_trial(cfg, 0)


@pytest.mark.parametrize("step", [1.0, 0.25])
@pytest.mark.parametrize("t_s", [None, 57.0])
def test_schedule_route_matches_rows(step, t_s):
    d = _small_trial(n=300)
    batch = ScheduleBatch(d.times, d.study_end)
    direct = fit_risk_sets(risk_sets_from_schedules(batch, d.time, d.event, step, t_s))
    outs = [SubjectOutcome(t, e, c) for t, e, c in zip(d.time, d.event, d.cycle)]
    rows = expand_counting_process(
        outs, [batch.schedule(i) for i in range(len(d))], "unclamped" if t_s is None else "clamped", t_s, step
    )
    assert direct.beta_hat == pytest.approx(fit(rows).beta_hat, abs=1e-10)


def test_clamped_fit_recovers_beta():
    d = _small_trial(n=5000, rate=0.1, seed=11)
    assert d.event.sum() > 300
    batch = ScheduleBatch(d.times, d.study_end)
    res = fit_risk_sets(risk_sets_from_schedules(batch, d.time, d.event, 0.25, 57.0))
    assert abs(res.beta_hat - 0.03) < 3 * res.beta_se


def test_unclamped_fit_attenuates():
    b = []
    for seed in range(8):
        d = _small_trial(n=1500, rate=0.1, seed=seed)
        rs = risk_sets_from_schedules(ScheduleBatch(d.times, d.study_end), d.time, d.event, 1.0)
        b.append(fit_risk_sets(rs).beta_hat)
    assert np.mean(b) < 0.03


def test_fixed_covariate_recovered():
    d = _small_trial(n=4000, rate=0.15, seed=3, eta=(0.5,), x_mean=(0.0,), x_sd=(1.0,))
    batch = ScheduleBatch(d.times, d.study_end)
    res = fit_risk_sets(risk_sets_from_schedules(batch, d.time, d.event, 0.25, 57.0, d.x))
    assert res.coef.shape == (2,)
    assert abs(res.coef[1] - 0.5) < 3 * res.se[1]
    assert abs(res.coef[0] - 0.03) < 3 * res.se[0]


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_matches_statsmodels_phreg(name):
    sm = pytest.importorskip("statsmodels.duration.hazard_regression")
    rows = FIXTURES[name]
    start = np.array([r.t_start for r in rows])
    stop = np.array([r.t_stop for r in rows])
    ev = np.array([r.event for r in rows], dtype=float)
    z = np.array([[r.z] for r in rows])
    # PHReg counts entry == event time as at risk; rows are open on the left
    ref = sm.PHReg(stop, z, status=ev, entry=start + 1e-9, ties="breslow").fit(disp=False)
    res = fit(rows)
    assert res.beta_hat == pytest.approx(ref.params[0], abs=1e-6)
    assert res.beta_se == pytest.approx(ref.bse[0], rel=1e-4)
