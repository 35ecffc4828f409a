"""AMP-like trial simulation: arms, adherence, repeated trials and summaries."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from .cox import fit_risk_sets, risk_sets_from_schedules
from .covariate import EffectModel, calibrate_rate
from .errors import ConfigError, DomainError, SeparationError
from .hazard import EXPONENTIAL, FAMILIES, BaselineHazard
from .multi_dose import multi_dose_batch
from .rng import arm_uniforms
from .schedule import AdherenceConfig, ScheduleBatch, schedule_uniform_count, schedules_from_uniforms
from .single_dose import aggregate_batch, neglog_uniform, single_dose_time

SINGLE_DOSE = "single-dose"
MULTIPLE_DOSE = "multiple-dose"
DAYS_PER_YEAR = 365.0


@dataclass(frozen=True)
class ArmSpec:
    """A trial arm; ``t_s=None`` marks the placebo arm."""

    label: str
    n: int
    t_s: float | None = None

    @property
    def placebo(self):
        return self.t_s is None


AMP_ARMS = (ArmSpec("low", 1500, 57.0), ArmSpec("high", 1500, 81.0), ArmSpec("placebo", 1500))


@dataclass(frozen=True)
class TrialConfig:
    approach: str = SINGLE_DOSE
    distribution: str = EXPONENTIAL
    shape: float = 0.0
    arms: tuple = AMP_ARMS
    annual_rate: float = 0.04
    beta: float = 0.03
    eta: tuple = ()
    x_mean: tuple = ()
    x_sd: tuple = ()
    adherence: AdherenceConfig = field(default_factory=AdherenceConfig)
    max_infusions: int = 10
    study_end: float = 560.0
    #: Days since infusion at which the hazard is calibrated to the placebo
    #: rate; ``None`` uses each arm's own ``t_s``.
    calibration_time: float | None = None
    trials: int = 1000
    master_seed: int = 0
    fit: bool = True
    fit_z: str = "unclamped"
    fit_step: float | None = 1.0

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        for name in ("eta", "x_mean", "x_sd"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    @property
    def lambda_p(self):
        """Placebo hazard per day."""
        return self.annual_rate / DAYS_PER_YEAR

    @property
    def p(self):
        return len(self.eta)

    def validate(self):
        if self.approach not in (SINGLE_DOSE, MULTIPLE_DOSE):
            raise ConfigError(f"unknown approach {self.approach!r}")
        if self.distribution not in FAMILIES:
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.approach == MULTIPLE_DOSE and self.distribution != EXPONENTIAL:
            raise ConfigError("the multiple-dose approach supports the exponential baseline only")
        if self.distribution == "weibull" and not self.shape > 0:
            raise ConfigError("Weibull shape must be positive")
        if not self.arms:
            raise ConfigError("at least one arm is required")
        labels = [a.label for a in self.arms]
        if len(set(labels)) != len(labels):
            raise ConfigError("arm labels must be unique")
        for a in self.arms:
            if a.n < 1:
                raise ConfigError(f"arm {a.label!r} needs n >= 1")
            if a.t_s is not None and not a.t_s > 0:
                raise ConfigError(f"arm {a.label!r} needs t_s > 0")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.annual_rate <= 0:
            raise ConfigError("annual_rate must be positive")
        if not (len(self.x_mean) == len(self.x_sd) == len(self.eta)):
            raise ConfigError("eta, x_mean and x_sd must have equal length")
        if any(sd < 0 for sd in self.x_sd):
            raise ConfigError("x_sd must be non-negative")
        if self.max_infusions < 1:
            raise ConfigError("max_infusions must be >= 1")
        last_target = (self.max_infusions - 1) * self.adherence.target_interval
        if self.max_infusions > 1 and last_target + self.adherence.window_high > self.study_end:
            raise ConfigError("study_end precedes the latest possible infusion")
        if self.fit_z not in ("clamped", "unclamped"):
            raise ConfigError(f"unknown fit_z {self.fit_z!r}")
        if self.fit_step is not None and not self.fit_step > 0:
            raise ConfigError("fit_step must be positive")
        if self.calibration_time is not None and not self.calibration_time > 0:
            raise ConfigError("calibration_time must be positive")

    def uniform_width(self):
        """Uniforms consumed per subject: schedule, one per interval, then ``x``."""
        return schedule_uniform_count(self.max_infusions) + self.max_infusions + self.p


@dataclass
class TrialData:
    """Per-subject outcomes of one simulated trial, all arms stacked."""

    trial: int
    arm_labels: tuple
    arm: np.ndarray
    subject: np.ndarray
    dose_ts: np.ndarray
    time: np.ndarray
    event: np.ndarray
    cycle: np.ndarray
    times: np.ndarray
    study_end: float
    x: np.ndarray
    fits: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.time)

    @property
    def last_infusion_time(self):
        with np.errstate(invalid="ignore"):
            prior = np.where(self.times <= self.time[:, None], self.times, -np.inf)
        return prior.max(axis=1)

    @property
    def time_since_prior_infusion(self):
        return self.time - self.last_infusion_time

    def arm_subset(self, label):
        k = self.arm_labels.index(label)
        return self.arm == k


def arm_effect(cfg: TrialConfig, arm: ArmSpec):
    return EffectModel(cfg.beta, arm.t_s, cfg.eta)


def arm_baseline(cfg: TrialConfig, arm: ArmSpec):
    """Baseline calibrated so the post-threshold hazard equals the placebo rate."""
    shape = 0.0 if cfg.distribution == EXPONENTIAL else cfg.shape
    t_cal = arm.t_s if cfg.calibration_time is None else cfg.calibration_time
    proto = BaselineHazard(cfg.distribution, 1.0, shape)
    lam = calibrate_rate(cfg.lambda_p, EffectModel(cfg.beta, t_cal, cfg.eta), proto)
    return proto.with_rate(lam)


def _simulate_arm(cfg: TrialConfig, arm: ArmSpec, trial_index, arm_index):
    m = cfg.max_infusions
    U = arm_uniforms(cfg.master_seed, trial_index, arm_index, arm.n, cfg.uniform_width())
    ns = schedule_uniform_count(m)
    batch = schedules_from_uniforms(cfg.adherence, m, U[:, :ns], cfg.study_end)
    E = neglog_uniform(U[:, ns : ns + m])
    x = cfg.x_mean + ndtri(U[:, ns + m :]) * np.asarray(cfg.x_sd) if cfg.p else np.zeros((arm.n, 0))
    lp = x @ np.asarray(cfg.eta) if cfg.p else np.zeros(arm.n)

    if arm.placebo:
        latent = E[:, 0] / cfg.lambda_p
        event = latent < cfg.study_end
        time = np.where(event, latent, cfg.study_end)
        with np.errstate(invalid="ignore"):
            cycle = np.sum(batch.times <= time[:, None], axis=1)
        cycle = np.where(event, cycle, batch.counts)
    elif cfg.approach == SINGLE_DOSE:
        T, _ = single_dose_time(arm_baseline(cfg, arm), arm_effect(cfg, arm), E, lp[:, None])
        time, event, cycle = aggregate_batch(batch, T)
    else:
        base = arm_baseline(cfg, arm)
        time, event, cycle, _ = multi_dose_batch(batch, base.lam, cfg.beta, arm.t_s, E[:, 0], lp)
    return batch, time, event, cycle, x


def run_trial(cfg: TrialConfig, trial_index) -> TrialData:
    """Simulate every arm of one trial; deterministic in ``(master_seed, trial_index)``."""
    parts = [_simulate_arm(cfg, arm, trial_index, k) for k, arm in enumerate(cfg.arms)]
    width = cfg.max_infusions
    times = np.vstack([np.pad(b.times, ((0, 0), (0, width - b.times.shape[1])), constant_values=np.nan) for b, *_ in parts])
    arm_idx = np.concatenate([np.full(a.n, k) for k, a in enumerate(cfg.arms)])
    data = TrialData(
        trial=int(trial_index),
        arm_labels=tuple(a.label for a in cfg.arms),
        arm=arm_idx,
        subject=np.concatenate([np.arange(a.n) for a in cfg.arms]),
        dose_ts=np.concatenate([np.full(a.n, np.nan if a.placebo else a.t_s) for a in cfg.arms]),
        time=np.concatenate([p[1] for p in parts]),
        event=np.concatenate([p[2] for p in parts]),
        cycle=np.concatenate([p[3] for p in parts]).astype(int),
        times=times,
        study_end=float(cfg.study_end),
        x=np.vstack([p[4] for p in parts]),
    )
    if cfg.fit:
        data.fits = fit_trial(data, cfg.fit_z, cfg.fit_step)
    return data


@dataclass(frozen=True)
class ArmFit:
    beta_hat: float
    se: float
    converged: bool
    events: int


def fit_trial(data: TrialData, z_spec="unclamped", step=1.0):
    """Fit the time-varying Cox model per treated arm of one trial."""
    fits = {}
    for k, label in enumerate(data.arm_labels):
        mask = data.arm == k
        if np.all(np.isnan(data.dose_ts[mask])):
            continue
        batch = ScheduleBatch(data.times[mask], data.study_end)
        t_s = data.dose_ts[mask] if z_spec == "clamped" else None
        n_ev = int(data.event[mask].sum())
        try:
            rs = risk_sets_from_schedules(batch, data.time[mask], data.event[mask], step, t_s)
            res = fit_risk_sets(rs)
            fits[label] = ArmFit(res.beta_hat, res.beta_se, res.converged, n_ev)
        except (DomainError, SeparationError):
            fits[label] = ArmFit(math.nan, math.nan, False, n_ev)
    return fits


def _trial_worker(args):
    cfg, i = args
    return run_trial(cfg, i)


def run_trials(cfg: TrialConfig, workers=1, trials=None):
    """Run trials ``0 .. trials-1``; results are ordered by trial index."""
    n = cfg.trials if trials is None else trials
    if workers <= 1:
        return [run_trial(cfg, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_worker, [(cfg, i) for i in range(n)], chunksize=max(1, n // (4 * workers))))


QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass
class ArmSummary:
    label: str
    n: int
    events: int
    event_time_quantiles: dict
    gap_quantiles: dict
    mean_gap: float
    cycle_at_risk: list
    cycle_events: list
    cycle_prob: list
    beta_hats: list
    beta_ses: list

    @property
    def event_fraction(self):
        return self.events / self.n

    @property
    def beta_mean(self):
        b = np.asarray(self.beta_hats, dtype=float)
        b = b[np.isfinite(b)]
        return float(b.mean()) if b.size else math.nan

    @property
    def beta_sd(self):
        b = np.asarray(self.beta_hats, dtype=float)
        b = b[np.isfinite(b)]
        return float(b.std(ddof=1)) if b.size > 1 else math.nan


@dataclass
class TrialSummary:
    trials: int
    arms: list

    def arm(self, label):
        for a in self.arms:
            if a.label == label:
                return a
        raise KeyError(label)


def _quantiles(values):
    if values.size == 0:
        return {q: math.nan for q in QUANTILES}
    return {q: float(v) for q, v in zip(QUANTILES, np.quantile(values, QUANTILES))}


def summarize(trials, fit=None, z_spec="unclamped", step=1.0):
    """Pool outcomes across trials into per-arm summaries.

    Per-cycle infection probability is events in cycle ``k`` over subjects
    who received infusion ``k`` event-free; it is NaN when nobody is at risk.
    Trials without stored fits are fitted when ``fit`` is true (or, with
    ``fit=None``, when no trial carries fits).
    """
    trials = list(trials)
    if not trials:
        raise DomainError("at least one trial is required")
    labels = trials[0].arm_labels
    width = max(t.times.shape[1] for t in trials)
    if fit is None:
        fit = not any(t.fits for t in trials)
    arms = []
    for label in labels:
        time, event, cycle, counts, gap = [], [], [], [], []
        b_hat, b_se = [], []
        for t in trials:
            m = t.arm_subset(label)
            time.append(t.time[m])
            event.append(t.event[m])
            cycle.append(t.cycle[m])
            counts.append(np.sum(~np.isnan(t.times[m]), axis=1))
            gap.append(t.time_since_prior_infusion[m])
            fits = t.fits if t.fits else (fit_trial(t, z_spec, step) if fit else {})
            if label in fits:
                b_hat.append(fits[label].beta_hat)
                b_se.append(fits[label].se)
        time, event, cycle = np.concatenate(time), np.concatenate(event), np.concatenate(cycle)
        counts, gap = np.concatenate(counts), np.concatenate(gap)
        at_risk, ev_k, prob = [], [], []
        for k in range(1, width + 1):
            r = int(np.sum((counts >= k) & (~event | (cycle >= k))))
            e = int(np.sum(event & (cycle == k)))
            at_risk.append(r)
            ev_k.append(e)
            prob.append(e / r if r else math.nan)
        arms.append(
            ArmSummary(
                label=label,
                n=int(time.size),
                events=int(event.sum()),
                event_time_quantiles=_quantiles(time[event]),
                gap_quantiles=_quantiles(gap[event]),
                mean_gap=float(gap[event].mean()) if event.any() else math.nan,
                cycle_at_risk=at_risk,
                cycle_events=ev_k,
                cycle_prob=prob,
                beta_hats=b_hat,
                beta_ses=b_se,
            )
        )
    return TrialSummary(len(trials), arms)
