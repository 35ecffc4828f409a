"""Baseline hazard families (Exponential, Weibull, Gompertz).

All times are in days and all rates are per day.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

#: Below this |alpha| (per day) the Gompertz cumulative hazard uses its linear limit.
GOMPERTZ_EPS = 1e-10

EXPONENTIAL = "exponential"
WEIBULL = "weibull"
GOMPERTZ = "gompertz"
FAMILIES = (EXPONENTIAL, WEIBULL, GOMPERTZ)


@dataclass(frozen=True)
class BaselineHazard:
    """Baseline hazard h0(t).

    Parameters
    ----------
    family : str
        One of ``"exponential"``, ``"weibull"``, ``"gompertz"``.
    lam : float
        Rate parameter, per day. Must be positive.
    shape : float
        Weibull shape ``gamma`` (> 0) or Gompertz shape ``alpha`` (per day,
        any sign). Ignored for the exponential family.
    """

    family: str
    lam: float
    shape: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown baseline family {self.family!r}")
        if not self.lam > 0:
            raise DomainError(f"rate must be positive, got {self.lam}")
        if self.family == WEIBULL and not self.shape > 0:
            raise DomainError(f"Weibull shape must be positive, got {self.shape}")
        if self.family == EXPONENTIAL and self.shape != 0.0:
            object.__setattr__(self, "shape", 0.0)

    @classmethod
    def exponential(cls, lam):
        return cls(EXPONENTIAL, lam)

    @classmethod
    def weibull(cls, lam, gamma):
        return cls(WEIBULL, lam, gamma)

    @classmethod
    def gompertz(cls, lam, alpha):
        return cls(GOMPERTZ, lam, alpha)

    def with_rate(self, lam):
        return BaselineHazard(self.family, lam, self.shape)


def _as_time(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("time must be non-negative")
    return arr


def _out(arr, t):
    return float(arr) if np.ndim(t) == 0 else arr


def hazard_at(b: BaselineHazard, t):
    """Evaluate h0(t). Accepts scalars or arrays."""
    if type(t) is float:
        return _hazard_scalar(b, t)
    tt = _as_time(t)
    if b.family == EXPONENTIAL:
        out = np.full_like(tt, b.lam)
    elif b.family == WEIBULL:
        if b.shape < 1 and np.any(tt == 0):
            raise DomainError("Weibull hazard with shape < 1 has a pole at t=0")
        out = b.lam * b.shape * tt ** (b.shape - 1.0)
    else:
        out = b.lam * np.exp(b.shape * tt)
    return _out(out, t)


def _hazard_scalar(b, t):
    if not t >= 0:
        raise DomainError("time must be non-negative")
    if b.family == EXPONENTIAL:
        return b.lam
    if b.family == WEIBULL:
        if t == 0 and b.shape < 1:
            raise DomainError("Weibull hazard with shape < 1 has a pole at t=0")
        return b.lam * b.shape * t ** (b.shape - 1.0)
    return b.lam * math.exp(b.shape * t)


def cumulative_baseline(b: BaselineHazard, t, eps=GOMPERTZ_EPS):
    """Closed-form H0(t) = integral of h0 over [0, t]."""
    tt = _as_time(t)
    if b.family == EXPONENTIAL:
        out = b.lam * tt
    elif b.family == WEIBULL:
        out = b.lam * tt ** b.shape
    elif abs(b.shape) < eps:
        out = b.lam * tt
    else:
        out = b.lam * np.expm1(b.shape * tt) / b.shape
    return _out(out, t)
