"""Infusion schedules and the adherence model that perturbs them.

A subject's realized schedule lists only the infusions actually given.
Visit ``k`` (``k >= 2``) targets day ``(k - 1) * target_interval``; a missed
visit is simply absent and later visits stay on the target grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

AMP_MAX_INFUSIONS = 10
TARGET_INTERVAL = 56.0


@dataclass(frozen=True)
class InfusionSchedule:
    """Realized infusion times ``t_1 = 0 < t_2 < ... < t_m`` and the study end."""

    times: tuple
    study_end: float

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "study_end", float(self.study_end))
        if not times or times[0] != 0.0:
            raise DomainError("schedule must start with an infusion at t=0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError(f"infusion times must be strictly increasing: {times}")
        if self.study_end < times[-1]:
            raise DomainError("study_end precedes the last infusion")

    @property
    def m(self):
        return len(self.times)

    @classmethod
    def perfect(cls, max_infusions=AMP_MAX_INFUSIONS, interval=TARGET_INTERVAL, study_end=None):
        if study_end is None:
            study_end = max_infusions * interval
        return cls(tuple(k * interval for k in range(max_infusions)), study_end)

    def latest_infusion(self, t):
        """Index and time of the latest infusion at or before ``t``."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k < 0:
            raise DomainError(f"time {t} precedes the first infusion")
        return k, self.times[k]


def intervals(sched: InfusionSchedule):
    """Interval lengths ``(I_1, ..., I_m)``; the last runs to ``study_end``."""
    edges = np.append(np.asarray(sched.times), sched.study_end)
    return tuple(np.diff(edges).tolist())


@dataclass(frozen=True)
class AdherenceConfig:
    """Per-visit adherence model.

    ``miss_prob`` and ``discontinue_prob`` are independent per-visit Bernoulli
    probabilities. Visit timing is jittered uniformly on
    ``[window_low, window_high]`` days around the target day.
    """

    miss_prob: float = 0.0
    window_low: float = 0.0
    window_high: float = 0.0
    discontinue_prob: float = 0.0
    target_interval: float = TARGET_INTERVAL

    def __post_init__(self):
        if not 0 <= self.miss_prob < 1:
            raise ConfigError(f"miss_prob must lie in [0, 1), got {self.miss_prob}")
        if not 0 <= self.discontinue_prob < 1:
            raise ConfigError(f"discontinue_prob must lie in [0, 1), got {self.discontinue_prob}")
        if not self.window_low <= 0 <= self.window_high:
            raise ConfigError("visit window must contain the target day")
        if self.target_interval <= 0:
            raise ConfigError("target_interval must be positive")
        # jitter is drawn on [low, high), so this keeps visits strictly increasing
        if self.window_high - self.window_low > self.target_interval:
            raise ConfigError("visit window must not be wider than target_interval")


def schedule_uniform_count(max_infusions):
    """Uniform variates consumed per subject by :func:`schedules_from_uniforms`."""
    return 3 * (max_infusions - 1)


@dataclass(frozen=True)
class ScheduleBatch:
    """Schedules for many subjects, padded with NaN to ``max_infusions`` columns."""

    times: np.ndarray
    study_end: float

    @property
    def counts(self):
        return np.sum(~np.isnan(self.times), axis=1)

    def __len__(self):
        return self.times.shape[0]

    def schedule(self, i):
        row = self.times[i]
        return InfusionSchedule(tuple(row[~np.isnan(row)]), self.study_end)

    @classmethod
    def from_schedules(cls, schedules):
        schedules = list(schedules)
        ends = {s.study_end for s in schedules}
        if len(ends) != 1:
            raise DomainError("all schedules in a batch must share study_end")
        width = max(s.m for s in schedules)
        times = np.full((len(schedules), width), np.nan)
        for i, s in enumerate(schedules):
            times[i, : s.m] = s.times
        return cls(times, ends.pop())


def schedules_from_uniforms(cfg: AdherenceConfig, max_infusions, uniforms, study_end=None):
    """Build schedules from a ``(n, 3 * (max_infusions - 1))`` block of uniforms.

    Column layout per visit ``k = 2..max_infusions`` (index ``j = k - 2``):
    ``3j`` discontinuation draw, ``3j + 1`` miss draw, ``3j + 2`` jitter draw.
    """
    if max_infusions < 1:
        raise DomainError("max_infusions must be >= 1")
    if study_end is None:
        study_end = max_infusions * cfg.target_interval
    u = np.atleast_2d(np.asarray(uniforms, dtype=float))
    n = u.shape[0]
    if u.shape[1] < schedule_uniform_count(max_infusions):
        raise DomainError("not enough uniforms for the schedule")
    times = np.full((n, max_infusions), np.nan)
    times[:, 0] = 0.0
    if max_infusions > 1:
        u = u[:, : schedule_uniform_count(max_infusions)].reshape(n, max_infusions - 1, 3)
        stopped = np.cumsum(u[:, :, 0] < cfg.discontinue_prob, axis=1) > 0
        given = ~stopped & (u[:, :, 1] >= cfg.miss_prob)
        target = cfg.target_interval * np.arange(1, max_infusions)
        jitter = cfg.window_low + (cfg.window_high - cfg.window_low) * u[:, :, 2]
        visit = target + jitter
        # compact the realized times to the left
        order = np.argsort(~given, axis=1, kind="stable")
        compact = np.take_along_axis(np.where(given, visit, np.nan), order, axis=1)
        times[:, 1:] = compact
    if np.nanmax(times) > study_end:
        raise ConfigError("an infusion falls after study_end")
    return ScheduleBatch(times, float(study_end))


def generate_schedule(cfg: AdherenceConfig, max_infusions, rng, study_end=None):
    """Draw one subject's realized schedule from ``rng``."""
    u = rng.random(schedule_uniform_count(max_infusions))
    return schedules_from_uniforms(cfg, max_infusions, u[None, :], study_end).schedule(0)
