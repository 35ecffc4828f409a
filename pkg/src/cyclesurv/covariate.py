"""Cyclic time-varying covariate with a zero-protection threshold.

Within each infusion cycle the covariate equals the time since the latest
infusion until it reaches ``t_s`` and stays there until the next infusion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .hazard import EXPONENTIAL, GOMPERTZ, BaselineHazard
from .schedule import InfusionSchedule

#: Average time (days) for concentration to fall to 5 mcg/mL, by dose (mg/kg).
DOSE_THRESHOLD_DAYS = {10: 57.0, 30: 81.0}


@dataclass(frozen=True)
class EffectModel:
    """Regression effects of the hazard model.

    Parameters
    ----------
    beta : float
        Log-hazard slope of ``z(t)``, per day.
    t_s : float
        Days after an infusion at which the threshold is reached.
    eta : tuple of float
        Coefficients of the fixed covariates.
    s : float, optional
        Concentration threshold (mcg/mL). Informational only.
    """

    beta: float
    t_s: float
    eta: tuple = ()
    s: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        if not self.t_s > 0:
            raise DomainError(f"t_s must be positive, got {self.t_s}")


@dataclass(frozen=True)
class SubjectCovariates:
    x: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))


def z_within_cycle(em: EffectModel, tau):
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise DomainError("time since infusion must be non-negative")
    out = np.minimum(tau_arr, em.t_s)
    return float(out) if np.ndim(tau) == 0 else out


def z_global(em: EffectModel, sched: InfusionSchedule, t):
    """Covariate at enrollment time ``t`` (resets to 0 at each infusion)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be non-negative")
    times = np.asarray(sched.times)
    k = np.searchsorted(times, t_arr, side="right") - 1
    out = np.minimum(t_arr - times[k], em.t_s)
    return float(out) if np.ndim(t) == 0 else out


def linear_predictor(em: EffectModel, sc: SubjectCovariates):
    if len(em.eta) != len(sc.x):
        raise DomainError(f"eta has length {len(em.eta)} but x has length {len(sc.x)}")
    return float(np.dot(em.eta, sc.x)) if em.eta else 0.0


def calibrate_lambda(lambda_p, em: EffectModel):
    """Baseline rate that makes the hazard at ``z = t_s`` equal ``lambda_p``."""
    if not lambda_p > 0:
        raise DomainError("placebo rate must be positive")
    return lambda_p * np.exp(-em.beta * em.t_s)


def calibrate_rate(lambda_p, em: EffectModel, baseline: BaselineHazard):
    """Like :func:`calibrate_lambda` for any baseline family.

    The post-threshold hazard is held at ``h0(t_s) exp(beta t_s)``, so the
    baseline shape factor at ``t_s`` is divided out as well.
    """
    lam = calibrate_lambda(lambda_p, em)
    if baseline.family == EXPONENTIAL:
        return lam
    if baseline.family == GOMPERTZ:
        return lam * np.exp(-baseline.shape * em.t_s)
    return lam / (baseline.shape * em.t_s ** (baseline.shape - 1.0))
