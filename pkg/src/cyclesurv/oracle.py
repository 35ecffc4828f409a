"""Numerical ground truth for the closed-form generators.

The cumulative hazard is integrated with adaptive Gauss-Kronrod quadrature
(QUADPACK) over pieces on which the integrand is smooth, and inverted with a
bracketed root finder. Nothing here uses a closed-form cumulative hazard.
"""
from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .covariate import EffectModel, SubjectCovariates, linear_predictor
from .errors import ConvergenceError, DomainError
from .hazard import BaselineHazard, hazard_at
from .schedule import InfusionSchedule

QUAD_TOL = 1e-13
INVERT_XTOL = 1e-11
#: Returned by :func:`invert` when the target is not reached before study end.
CENSORED = math.inf

SINGLE_DOSE = InfusionSchedule((0.0,), math.inf)


@dataclass(frozen=True)
class HazardPath:
    """Full hazard ``h0(clock(t)) exp(beta z(t) + eta'x)`` of one subject.

    ``baseline_clock="cycle"`` evaluates the baseline at the covariate's own
    clock (time since infusion, held at ``t_s``), so the whole hazard is
    frozen past the threshold and restarts at each infusion. ``"calendar"``
    evaluates the baseline at time since enrollment. The two coincide for the
    exponential family.
    """

    baseline: BaselineHazard
    effect: EffectModel
    covariates: SubjectCovariates = field(default_factory=SubjectCovariates)
    schedule: InfusionSchedule = SINGLE_DOSE
    baseline_clock: str = "cycle"

    def __post_init__(self):
        if self.baseline_clock not in ("cycle", "calendar"):
            raise DomainError(f"unknown baseline clock {self.baseline_clock!r}")
        linear_predictor(self.effect, self.covariates)

    @cached_property
    def _offset(self):
        return math.exp(linear_predictor(self.effect, self.covariates))

    @cached_property
    def edges(self):
        """Sorted breakpoints: 0, infusion times, ``t_k + t_s`` and study end."""
        times = self.schedule.times
        pts = set(times)
        # the last cycle runs on past study_end
        nxt = list(times[1:]) + [math.inf]
        for t_k, t_next in zip(times, nxt):
            if t_k + self.effect.t_s < t_next:
                pts.add(t_k + self.effect.t_s)
        if math.isfinite(self.schedule.study_end):
            pts.add(self.schedule.study_end)
        return tuple(sorted(pts))

    def hazard(self, t):
        t = float(t)
        times = self.schedule.times
        t_k = times[bisect.bisect_right(times, t) - 1]
        z = min(t - t_k, self.effect.t_s)
        clock = z if self.baseline_clock == "cycle" else t
        return hazard_at(self.baseline, float(clock)) * math.exp(self.effect.beta * z) * self._offset

    def integrate(self, lo, hi):
        """Integral of the hazard over ``[lo, hi]`` inside one smooth piece."""
        if hi <= lo:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                val, _ = quad(self.hazard, lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
            except IntegrationWarning as exc:
                raise ConvergenceError(f"quadrature failed on [{lo}, {hi}]: {exc}") from exc
        return val

    @cached_property
    def edge_values(self):
        vals = [0.0]
        for lo, hi in zip(self.edges, self.edges[1:]):
            vals.append(vals[-1] + self.integrate(lo, hi))
        return tuple(vals)

    def _piece(self, t):
        return bisect.bisect_right(self.edges, t) - 1


def cumulative_hazard(path: HazardPath, t):
    """``H(t)``; vectorizes over array ``t`` by sorted incremental integration."""
    if np.ndim(t) == 0:
        t = float(t)
        if not t >= 0:
            raise DomainError("time must be non-negative")
        j = path._piece(t)
        return path.edge_values[j] + path.integrate(path.edges[j], t)
    ts = np.asarray(t, dtype=float)
    if np.any(~(ts >= 0)):
        raise DomainError("time must be non-negative")
    order = np.argsort(ts, kind="stable")
    out = np.empty_like(ts)
    prev_t, prev_h, prev_j = 0.0, 0.0, 0
    for i in order:
        ti = float(ts[i])
        j = path._piece(ti)
        if j != prev_j:
            prev_t, prev_h, prev_j = path.edges[j], path.edge_values[j], j
        prev_h = prev_h + path.integrate(prev_t, ti)
        prev_t = ti
        out[i] = prev_h
    return out


def invert(path: HazardPath, target, censor=True):
    """Solve ``H(t) = target``.

    Returns :data:`CENSORED` when ``censor`` is set and the target exceeds
    ``H(study_end)``; otherwise the hazard is followed past study end.
    """
    target = float(target)
    if not target >= 0 or math.isinf(target):
        raise DomainError("target must be finite and non-negative")
    if target == 0:
        return 0.0
    edges, vals = path.edges, path.edge_values
    end = path.schedule.study_end
    if censor and math.isfinite(end) and target > vals[edges.index(end)]:
        return CENSORED
    j = bisect.bisect_right(vals, target) - 1
    lo = edges[j]
    base = vals[j]
    if j + 1 < len(edges):
        hi = edges[j + 1]
    else:
        width = max(1.0, lo)
        hi = lo + width
        for _ in range(200):
            if base + path.integrate(lo, hi) >= target:
                break
            width *= 2.0
            hi = lo + width
        else:
            raise ConvergenceError("could not bracket the target cumulative hazard")

    def resid(t):
        return base + path.integrate(lo, t) - target

    f_lo, f_hi = resid(lo), resid(hi)
    if f_lo > 0 or f_hi < 0:
        raise ConvergenceError(f"bracket [{lo}, {hi}] does not contain the target")
    if f_hi == 0:
        return hi
    t = brentq(resid, lo, hi, xtol=INVERT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
    # Newton polish, kept only when it stays inside the piece and helps
    r = resid(t)
    for _ in range(3):
        if r == 0 or t <= lo or t >= hi:
            break
        cand = t - r / path.hazard(t)
        if not lo < cand < hi:
            break
        r_cand = resid(cand)
        if abs(r_cand) >= abs(r):
            break
        t, r = cand, r_cand
    return t
