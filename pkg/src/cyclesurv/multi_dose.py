"""Direct multiple-dose generator for an exponential baseline.

The cumulative hazard over the whole schedule is a sum of per-interval
contributions. Interval ``k`` of length ``I_k`` contributes, in units of
``lam e^{eta'x}``::

    (exp(beta min(I_k, t_s)) - 1) / beta + max(I_k - t_s, 0) exp(beta t_s)

so ``a_1 = 0``, ``b_k = a_k + contribution_k`` and ``a_{k+1} = b_k``. Inside
an interval the inverse is logarithmic before ``t_k + t_s`` and affine after.
Draws beyond ``study_end`` continue the last cycle and are censored.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariate import EffectModel, SubjectCovariates, linear_predictor
from .errors import DomainError
from .outcome import SubjectOutcome
from .schedule import InfusionSchedule, ScheduleBatch
from .single_dose import SLOPE_EPS, interval_matrix, neglog_uniform

_SEGMENT_SLACK = 1e-9


@dataclass(frozen=True)
class SegmentBounds:
    """Cumulative-hazard cutoffs per realized interval.

    ``a[k] <= E < b[k]`` selects interval ``k``; ``threshold[k]`` is the
    cumulative hazard at ``t_k + t_s`` (equal to ``b[k]`` when ``I_k <= t_s``).
    """

    a: tuple
    b: tuple
    threshold: tuple


def _rise(beta, span):
    """``(exp(beta span) - 1) / beta`` with its ``beta -> 0`` limit."""
    if abs(beta) < SLOPE_EPS:
        return span
    return np.expm1(beta * span) / beta


def bounds_batch(batch: ScheduleBatch, lam, beta, t_s, lp=0.0):
    """Arrays ``(a, b, threshold)`` of shape ``(n, width)``, NaN-padded."""
    c = lam * np.exp(np.asarray(lp, dtype=float)).reshape(-1, 1)
    I = interval_matrix(batch)
    pre = c * _rise(beta, np.minimum(I, t_s))
    flat = c * np.maximum(I - t_s, 0.0) * np.exp(beta * t_s)
    contrib = pre + flat
    b = np.nancumsum(contrib, axis=1)
    a = np.concatenate([np.zeros((b.shape[0], 1)), b[:, :-1]], axis=1)
    valid = ~np.isnan(I)
    a = np.where(valid, a, np.nan)
    b = np.where(valid, b, np.nan)
    return a, b, a + pre


def multi_dose_batch(batch: ScheduleBatch, lam, beta, t_s, E, lp=0.0):
    """Invert the whole-schedule cumulative hazard at ``E`` for each subject.

    Returns ``(time, event, cycle, latent)``.
    """
    E = np.asarray(E, dtype=float)
    if np.any(~(E >= 0)) or np.any(np.isinf(E)):
        raise DomainError("target cumulative hazard must be finite and >= 0")
    n = len(batch)
    rows = np.arange(n)
    lp = np.broadcast_to(np.asarray(lp, dtype=float), (n,))
    c = lam * np.exp(lp)
    a, b, th = bounds_batch(batch, lam, beta, t_s, lp)
    with np.errstate(invalid="ignore"):
        k = np.sum(a <= E[:, None], axis=1) - 1
    start = batch.times[rows, k]
    counts = batch.counts
    a_k, th_k = a[rows, k], th[rows, k]
    # past study_end the last cycle continues, so its threshold is a full t_s in
    th_k = np.where(k == counts - 1, a_k + c * _rise(beta, t_s), th_k)
    r = E - a_k
    if abs(beta) < SLOPE_EPS:
        pre = start + r / c
    else:
        pre = start + np.log1p(beta * (np.minimum(E, th_k) - a_k) / c) / beta
    post = start + t_s + (E - th_k) / (c * np.exp(beta * t_s))
    latent = np.where(E >= th_k, post, pre)

    tail = E >= b[rows, counts - 1]
    end = np.concatenate([batch.times, np.full((n, 1), np.nan)], axis=1)
    end[rows, counts] = np.inf
    upper = end[rows, k + 1]
    if np.any(latent < start - _SEGMENT_SLACK) or np.any(~tail & (latent > upper + _SEGMENT_SLACK)):
        raise AssertionError("multiple-dose draw fell outside its selected segment")

    event = latent < batch.study_end
    time = np.where(event, latent, batch.study_end)
    cycle = np.where(event, k + 1, counts)
    return time, event, cycle, latent


def segment_bounds(em: EffectModel, sc: SubjectCovariates, lam, sched: InfusionSchedule):
    if not lam > 0:
        raise DomainError("rate must be positive")
    lp = linear_predictor(em, sc)
    a, b, th = bounds_batch(ScheduleBatch.from_schedules([sched]), lam, em.beta, em.t_s, lp)
    return SegmentBounds(tuple(a[0].tolist()), tuple(b[0].tolist()), tuple(th[0].tolist()))


def draw_multi(em: EffectModel, sc: SubjectCovariates, lam, sched: InfusionSchedule, u):
    """Draw one subject's outcome from a single uniform ``u``."""
    if not lam > 0:
        raise DomainError("rate must be positive")
    E = np.atleast_1d(neglog_uniform(u))
    time, event, cycle, latent = multi_dose_batch(
        ScheduleBatch.from_schedules([sched]), lam, em.beta, em.t_s, E, linear_predictor(em, sc)
    )
    return SubjectOutcome(float(time[0]), bool(event[0]), int(cycle[0]), float(latent[0]))
