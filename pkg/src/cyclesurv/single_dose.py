"""Single-dose event-time generators and multiple-dose aggregation.

Each generator inverts the cumulative hazard of one infusion cycle,
``T = H^{-1}(E)`` with ``E = -log(u)``. Before ``t_s`` the covariate grows
with time since infusion; afterwards the whole hazard is held at its value
at ``t_s``. The ``*_time`` functions take ``E`` directly and vectorize over it.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .covariate import EffectModel, SubjectCovariates, linear_predictor
from .errors import ConvergenceError, DomainError
from .hazard import EXPONENTIAL, GOMPERTZ, WEIBULL, BaselineHazard
from .outcome import SubjectOutcome
from .schedule import InfusionSchedule, ScheduleBatch

#: Below this |slope| (per day) the closed forms switch to their linear limits.
SLOPE_EPS = 1e-10
SERIES_RTOL = 1e-14
_MAX_TERMS = 2000
_MAX_NEWTON = 200


class SingleDoseDraw(NamedTuple):
    time: float | np.ndarray
    post_threshold: bool | np.ndarray


def neglog_uniform(u):
    """``-log(u)``; exact 0 and 1 are nudged one ulp into (0, 1)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr >= 0) & (u_arr <= 1))):
        raise DomainError("uniform variate must lie in (0, 1)")
    u_arr = np.clip(u_arr, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return -np.log(u_arr)


def _check_target(E):
    E = np.asarray(E, dtype=float)
    if np.any(~(E >= 0)) or np.any(np.isinf(E)):
        raise DomainError("target cumulative hazard must be finite and >= 0")
    return E


def _pack(T, post, like):
    if np.ndim(like) == 0:
        return SingleDoseDraw(float(T), bool(post))
    return SingleDoseDraw(T, post)


def exponential_time(E, lam, slope, t_s, lp=0.0):
    """Invert the log-linear-then-flat cycle hazard ``lam e^{lp} e^{slope min(t, t_s)}``.

    With ``slope = beta`` this is the exponential generator; with
    ``slope = beta + alpha`` it is the Gompertz generator.
    """
    E = _check_target(E)
    c = lam * np.exp(lp)
    if abs(slope) < SLOPE_EPS:
        bound = c * t_s
        pre = E / c
        post_scale = c
    else:
        bound = c * np.expm1(slope * t_s) / slope
        pre = np.log1p(slope * np.minimum(E, bound) / c) / slope
        post_scale = c * np.exp(slope * t_s)
    is_post = E >= bound
    T = np.where(is_post, (E - bound) / post_scale + t_s, pre)
    return T, is_post


def weibull_integral(t, gamma, beta):
    """``G(t) = integral_0^t v^(gamma-1) e^(beta v) dv`` by power series.

    For ``beta >= 0`` the direct series ``sum (beta t)^j / (j! (gamma + j))`` is
    used; for ``beta < 0`` the Kummer-transformed series, whose terms are all
    positive as well.
    """
    t = np.asarray(t, dtype=float)
    x = abs(beta) * t
    if beta >= 0:
        term = np.ones_like(t)
        total = term / gamma
        for j in range(1, _MAX_TERMS):
            term = term * x / j
            inc = term / (gamma + j)
            total = total + inc
            if np.all(inc <= SERIES_RTOL * total):
                break
        else:
            raise ConvergenceError("Weibull series did not converge")
        return t**gamma * total
    term = np.full_like(t, 1.0 / gamma)
    total = term.copy()
    for j in range(1, _MAX_TERMS):
        term = term * x / (gamma + j)
        total = total + term
        if np.all(term <= SERIES_RTOL * total):
            break
    else:
        raise ConvergenceError("Weibull series did not converge")
    return t**gamma * np.exp(-x) * total


def invert_weibull_integral(y, gamma, beta, upper):
    """Solve ``G(T) = y`` for ``T`` in ``[0, upper]`` by safeguarded Newton."""
    shape = np.shape(y)
    y = np.asarray(y, dtype=float).ravel()
    lo = np.zeros_like(y)
    hi = np.full_like(y, float(upper))
    T = np.clip((gamma * y) ** (1.0 / gamma), 0.0, upper)
    active = y > 0
    T = np.where(active, T, 0.0)
    for _ in range(_MAX_NEWTON):
        if not np.any(active):
            return T.reshape(shape)
        Ta = T[active]
        f = weibull_integral(Ta, gamma, beta) - y[active]
        lo[active] = np.where(f < 0, Ta, lo[active])
        hi[active] = np.where(f > 0, Ta, hi[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            deriv = Ta ** (gamma - 1.0) * np.exp(beta * Ta)
            step = Ta - f / deriv
        la, ha = lo[active], hi[active]
        bad = ~np.isfinite(step) | (step <= la) | (step >= ha)
        new = np.where(bad, 0.5 * (la + ha), step)
        done = (np.abs(new - Ta) <= 1e-14 * np.maximum(Ta, 1.0)) | (f == 0) | (ha - la <= 1e-15 * np.maximum(ha, 1.0))
        T[active] = new
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    raise ConvergenceError("Weibull inversion did not converge")


def weibull_time(E, lam, gamma, beta, t_s, lp=0.0):
    """Invert the Weibull cycle hazard ``lam gamma v^(gamma-1) e^{lp + beta min(v, t_s)}``,
    frozen entirely at its ``t_s`` value beyond ``t_s``."""
    E = _check_target(E)
    c = lam * gamma * np.exp(lp)
    g_s = float(weibull_integral(t_s, gamma, beta))
    bound = c * g_s
    is_post = E >= bound
    pre = invert_weibull_integral(np.where(is_post, 0.0, E / c), gamma, beta, t_s)
    post_scale = c * t_s ** (gamma - 1.0) * np.exp(beta * t_s)
    T = np.where(is_post, (E - bound) / post_scale + t_s, pre)
    return T, is_post


def single_dose_time(baseline: BaselineHazard, em: EffectModel, E, lp=0.0):
    """Dispatch on the baseline family; ``baseline.lam`` is the rate used."""
    if baseline.family == EXPONENTIAL:
        return exponential_time(E, baseline.lam, em.beta, em.t_s, lp)
    if baseline.family == GOMPERTZ:
        return exponential_time(E, baseline.lam, em.beta + baseline.shape, em.t_s, lp)
    if baseline.family == WEIBULL:
        return weibull_time(E, baseline.lam, baseline.shape, em.beta, em.t_s, lp)
    raise DomainError(baseline.family)


def draw_exponential(em: EffectModel, sc: SubjectCovariates, lam, u):
    T, post = exponential_time(neglog_uniform(u), lam, em.beta, em.t_s, linear_predictor(em, sc))
    return _pack(T, post, u)


def draw_weibull(em: EffectModel, sc: SubjectCovariates, lam, gamma, u):
    if not (lam > 0 and gamma > 0):
        raise DomainError("Weibull rate and shape must be positive")
    T, post = weibull_time(neglog_uniform(u), lam, gamma, em.beta, em.t_s, linear_predictor(em, sc))
    return _pack(T, post, u)


def draw_gompertz(em: EffectModel, sc: SubjectCovariates, lam, alpha, u):
    T, post = exponential_time(
        neglog_uniform(u), lam, em.beta + alpha, em.t_s, linear_predictor(em, sc)
    )
    return _pack(T, post, u)


def interval_matrix(batch: ScheduleBatch):
    """``(n, width)`` interval lengths; NaN past each subject's last infusion."""
    times = batch.times
    n, width = times.shape
    edges = np.concatenate([times, np.full((n, 1), np.nan)], axis=1)
    edges[np.arange(n), batch.counts] = batch.study_end
    return np.diff(edges, axis=1)


def aggregate_batch(batch: ScheduleBatch, draws):
    """Combine per-interval single-dose times into multiple-dose outcomes.

    ``draws[i, k]`` is subject ``i``'s independent time since infusion ``k``.
    The event falls in the first interval with ``T_k < I_k``; subjects with
    no such interval are censored at ``study_end``.

    Returns ``(time, event, cycle)`` arrays; ``cycle`` is 1-based.
    """
    draws = np.asarray(draws, dtype=float)
    width = batch.times.shape[1]
    intervals = interval_matrix(batch)
    with np.errstate(invalid="ignore"):
        fail = draws[:, :width] < intervals
    event = fail.any(axis=1)
    first = np.argmax(fail, axis=1)
    rows = np.arange(len(batch))
    time = np.where(event, batch.times[rows, first] + draws[rows, first], batch.study_end)
    cycle = np.where(event, first + 1, batch.counts)
    return time, event, cycle


def aggregate_multidose(sched: InfusionSchedule, draw, rng):
    """Aggregate one subject; ``draw(u)`` maps a uniform to a single-dose time.

    Uniforms are consumed from ``rng`` in schedule order, one per interval.
    """
    u = rng.random(sched.m)
    T = np.array([[float(draw(uk)) for uk in u]])
    time, event, cycle = aggregate_batch(ScheduleBatch.from_schedules([sched]), T)
    return SubjectOutcome(float(time[0]), bool(event[0]), int(cycle[0]))
