"""Cross-check of every closed-form generator against the numerical oracle."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .covariate import EffectModel, SubjectCovariates
from .hazard import BaselineHazard
from .multi_dose import bounds_batch, multi_dose_batch
from .oracle import CENSORED, HazardPath, cumulative_hazard, invert
from .schedule import InfusionSchedule, ScheduleBatch
from .single_dose import single_dose_time

TIME_TOL = 1e-6
HAZARD_TOL = 1e-8


@dataclass(frozen=True)
class CheckRecord:
    case: str
    target: float
    closed: float
    oracle: float
    hazard_residual: float

    @property
    def time_error(self):
        if math.isinf(self.closed) and math.isinf(self.oracle):
            return 0.0
        return abs(self.closed - self.oracle)

    @property
    def passed(self):
        return self.time_error <= TIME_TOL and self.hazard_residual <= HAZARD_TOL


def _covariates(lp):
    # one fixed covariate with unit coefficient carries the linear predictor
    return (1.0,), SubjectCovariates((lp,))


def single_dose_cases():
    """``(label, baseline, effect, covariates)`` for the single-dose grid."""
    cases = []
    for lam, beta, t_s, lp in itertools.product((1e-4, 1e-3), (0.03, -0.02, 0.0), (57.0, 81.0), (0.0, 0.7)):
        eta, sc = _covariates(lp)
        cases.append((f"exp lam={lam} beta={beta} ts={t_s} lp={lp}",
                      BaselineHazard.exponential(lam), EffectModel(beta, t_s, eta), sc))
    for gamma, beta, lp in itertools.product((0.7, 1.5, 2.5), (0.03, -0.02), (0.0, -0.4)):
        eta, sc = _covariates(lp)
        cases.append((f"weibull gamma={gamma} beta={beta} lp={lp}",
                      BaselineHazard.weibull(1e-4, gamma), EffectModel(beta, 57.0, eta), sc))
    for alpha, beta, lp in itertools.product((0.005, -0.01, -0.03), (0.03, -0.02), (0.0, 0.5)):
        eta, sc = _covariates(lp)
        cases.append((f"gompertz alpha={alpha} beta={beta} lp={lp}",
                      BaselineHazard.gompertz(1e-4, alpha), EffectModel(beta, 57.0, eta), sc))
    return cases


def multi_dose_schedules():
    return {
        "perfect": InfusionSchedule.perfect(10, 56.0, 560.0),
        "missed-2": InfusionSchedule((0.0, 112.0, 168.0, 224.0, 280.0, 336.0, 392.0, 448.0, 504.0), 560.0),
        "missed-2-5": InfusionSchedule((0.0, 112.0, 168.0, 280.0, 336.0, 392.0, 448.0, 504.0), 560.0),
        "jittered": InfusionSchedule((0.0, 61.5, 110.0, 230.25, 270.0, 333.0, 400.0, 500.0), 560.0),
        "single": InfusionSchedule((0.0,), 560.0),
    }


def _single_dose_records(fractions=(1e-3, 0.2, 0.6, 0.95, 1.5, 4.0)):
    records = []
    for label, base, em, sc in single_dose_cases():
        path = HazardPath(base, em, sc)
        h_ts = cumulative_hazard(path, em.t_s)
        targets = np.array([f * h_ts for f in fractions])
        T, _ = single_dose_time(base, em, targets, sc.x[0] * em.eta[0])
        for E, t in zip(targets, T):
            t_or = invert(path, E, censor=False)
            resid = abs(cumulative_hazard(path, float(t)) - E)
            records.append(CheckRecord(label, float(E), float(t), t_or, resid))
    return records


def _multi_dose_records(fractions=(1e-3, 0.07, 0.15, 0.31, 0.5, 0.64, 0.83, 0.97, 1.3)):
    records = []
    for (name, sched), beta, t_s, lp in itertools.product(
        multi_dose_schedules().items(), (0.03, -0.02, 0.0), (57.0, 81.0), (0.0, 0.3)
    ):
        lam = 1e-3
        eta, sc = _covariates(lp)
        em = EffectModel(beta, t_s, eta)
        path = HazardPath(BaselineHazard.exponential(lam), em, sc, sched)
        batch = ScheduleBatch.from_schedules([sched])
        h_end = cumulative_hazard(path, sched.study_end)
        for f in fractions:
            E = f * h_end
            time, event, _, latent = multi_dose_batch(batch, lam, beta, t_s, np.array([E]), lp)
            closed = float(time[0]) if event[0] else CENSORED
            t_or = invert(path, E)
            resid = abs(cumulative_hazard(path, float(latent[0])) - E)
            records.append(CheckRecord(f"multi {name} beta={beta} ts={t_s} lp={lp}", E, closed, t_or, resid))
    return records


def oracle_equivalence():
    """All grid records; every one must pass."""
    return _single_dose_records() + _multi_dose_records()


def multi_dose_boundary_gaps():
    """Largest left/right disagreement (days) at every segment and threshold cutoff."""
    worst = 0.0
    for (name, sched), beta, t_s in itertools.product(multi_dose_schedules().items(), (0.03, -0.02, 0.0), (57.0, 81.0)):
        batch = ScheduleBatch.from_schedules([sched])
        a, b, th = bounds_batch(batch, 1e-3, beta, t_s)
        cut = np.unique(np.concatenate([a[0], b[0], th[0]]))
        cut = cut[cut > 0]
        left = multi_dose_batch(ScheduleBatch(np.repeat(batch.times, cut.size, axis=0), batch.study_end),
                                1e-3, beta, t_s, np.nextafter(cut, 0))[3]
        right = multi_dose_batch(ScheduleBatch(np.repeat(batch.times, cut.size, axis=0), batch.study_end),
                                 1e-3, beta, t_s, cut)[3]
        worst = max(worst, float(np.max(np.abs(left - right))))
    return worst
