"""Configuration files and CSV outputs.

Configuration is TOML with a flat key set (``config_version = 1``)::

    approach = "single-dose"        # or "multiple-dose"
    distribution = "exponential"    # "weibull", "gompertz"
    shape = 0.0                     # Weibull gamma or Gompertz alpha
    annual_rate = 0.04              # placebo incidence per year
    beta = 0.03
    eta = []                        # fixed-covariate coefficients
    x_mean = []                     # x ~ Normal(x_mean, x_sd) per component
    x_sd = []
    arms = [{label = "low", n = 1500, t_s = 57.0}, {label = "placebo", n = 1500}]
    miss_prob = 0.02
    window_low = -7.0
    window_high = 49.0
    discontinue_prob = 0.0
    target_interval = 56.0
    max_infusions = 10
    study_end = 560.0
    calibration_time = 56.0         # optional; default is each arm's t_s
    trials = 1000
    master_seed = 1
    fit = true
    fit_z = "unclamped"             # or "clamped"
    fit_step = 1.0                  # 0 means exact time since infusion

All CSV numbers are written with 17 significant digits.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import fields

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError
from .schedule import AdherenceConfig
from .trial import ArmFit, ArmSpec, TrialConfig, TrialData

CONFIG_VERSION = 1
_ADHERENCE_KEYS = tuple(f.name for f in fields(AdherenceConfig))
_TRIAL_KEYS = tuple(f.name for f in fields(TrialConfig) if f.name != "adherence")


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.17g}"


def _num(s):
    return math.nan if s == "" else float(s)


def config_from_mapping(raw):
    raw = dict(raw)
    version = raw.pop("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version}")
    unknown = set(raw) - set(_TRIAL_KEYS) - set(_ADHERENCE_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return _build(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _build(raw):
    adherence = AdherenceConfig(**{k: float(raw.pop(k)) for k in _ADHERENCE_KEYS if k in raw})
    if "arms" in raw:
        arms = []
        for a in raw["arms"]:
            extra = set(a) - {"label", "n", "t_s"}
            if extra:
                raise ConfigError(f"unknown arm keys: {sorted(extra)}")
            arms.append(ArmSpec(str(a["label"]), int(a["n"]), None if a.get("t_s") is None else float(a["t_s"])))
        raw["arms"] = tuple(arms)
    if raw.get("fit_step") == 0:
        raw["fit_step"] = None
    return TrialConfig(adherence=adherence, **raw)


def parse_override(text):
    """Parse ``key=value`` where ``value`` uses TOML syntax (bare words are strings)."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, value = text.split("=", 1)
    key = key.strip()
    try:
        parsed = tomli.loads(f"v = {value}")["v"]
    except tomli.TOMLDecodeError:
        parsed = value.strip()
    return key, parsed


def load_config(path=None, overrides=()):
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for key, value in overrides:
        raw[key] = value
    return config_from_mapping(raw)


def dump_config(cfg: TrialConfig):
    """TOML text that :func:`load_config` maps back to an equal config."""
    doc = {"config_version": CONFIG_VERSION}
    for name in _TRIAL_KEYS:
        v = getattr(cfg, name)
        if name == "arms":
            v = [{"label": a.label, "n": a.n} | ({} if a.t_s is None else {"t_s": float(a.t_s)}) for a in v]
        elif name == "fit_step" and v is None:
            v = 0
        elif v is None:
            continue
        elif isinstance(v, tuple):
            v = list(v)
        doc[name] = v
    for name in _ADHERENCE_KEYS:
        doc[name] = float(getattr(cfg.adherence, name))
    return tomli_w.dumps(doc)


OUTCOME_COLUMNS = [
    "trial", "id", "arm", "dose_ts", "S", "event", "last_infusion_time",
    "time_since_prior_infusion", "cycle", "infusion_times", "x",
]


def _open(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_outcomes(trials, path):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OUTCOME_COLUMNS)
        for t in trials:
            last = t.last_infusion_time
            gap = t.time_since_prior_infusion
            for i in range(len(t)):
                times = t.times[i][~np.isnan(t.times[i])]
                w.writerow([
                    t.trial, int(t.subject[i]), t.arm_labels[t.arm[i]], fmt(t.dose_ts[i]),
                    fmt(t.time[i]), fmt(bool(t.event[i])), fmt(last[i]), fmt(gap[i]),
                    int(t.cycle[i]), ";".join(fmt(v) for v in times),
                    ";".join(fmt(v) for v in t.x[i]),
                ])


def read_outcomes(path, study_end=None):
    """Re-ingest an outcomes CSV as a list of :class:`TrialData`, one per trial.

    ``study_end`` defaults to the largest censoring time found.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []
    labels = tuple(dict.fromkeys(r["arm"] for r in rows))
    if study_end is None:
        censored = [float(r["S"]) for r in rows if r["event"] == "0"]
        study_end = max(censored) if censored else max(float(r["S"]) for r in rows)
    by_trial = {}
    for r in rows:
        by_trial.setdefault(int(r["trial"]), []).append(r)
    out = []
    for trial, rs in sorted(by_trial.items()):
        sched = [[float(v) for v in r["infusion_times"].split(";")] for r in rs]
        width = max(len(s) for s in sched)
        times = np.full((len(rs), width), np.nan)
        for i, s in enumerate(sched):
            times[i, : len(s)] = s
        xs = [[float(v) for v in r["x"].split(";")] if r["x"] else [] for r in rs]
        p = max((len(v) for v in xs), default=0)
        out.append(TrialData(
            trial=trial,
            arm_labels=labels,
            arm=np.array([labels.index(r["arm"]) for r in rs]),
            subject=np.array([int(r["id"]) for r in rs]),
            dose_ts=np.array([_num(r["dose_ts"]) for r in rs]),
            time=np.array([float(r["S"]) for r in rs]),
            event=np.array([r["event"] == "1" for r in rs]),
            cycle=np.array([int(r["cycle"]) for r in rs]),
            times=times,
            study_end=float(study_end),
            x=np.array(xs, dtype=float).reshape(len(rs), p),
        ))
    return out


def write_fits(trials, path):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "arm", "beta_hat", "se", "converged", "events"])
        for t in trials:
            for label, f in t.fits.items():
                w.writerow([t.trial, label, fmt(f.beta_hat), fmt(f.se), fmt(bool(f.converged)), f.events])


def read_fits(path):
    fits = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            fits.setdefault(int(r["trial"]), {})[r["arm"]] = ArmFit(
                _num(r["beta_hat"]), _num(r["se"]), r["converged"] == "1", int(r["events"])
            )
    return fits


def summary_rows(summary):
    rows = []
    for a in summary.arms:
        def add(metric, value):
            rows.append([a.label, metric, fmt(value)])

        add("n", a.n)
        add("events", a.events)
        add("event_fraction", a.event_fraction)
        for q, v in a.event_time_quantiles.items():
            add(f"event_time_q{int(round(q * 100)):02d}", v)
        add("mean_time_since_prior_infusion", a.mean_gap)
        for q, v in a.gap_quantiles.items():
            add(f"time_since_prior_infusion_q{int(round(q * 100)):02d}", v)
        for k, (r, e, p) in enumerate(zip(a.cycle_at_risk, a.cycle_events, a.cycle_prob), start=1):
            add(f"cycle_{k}_at_risk", r)
            add(f"cycle_{k}_events", e)
            add(f"cycle_{k}_prob", p)
        add("n_fits", len(a.beta_hats))
        add("beta_hat_mean", a.beta_mean)
        add("beta_hat_sd", a.beta_sd)
    return rows


def write_summary(summary, path):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm", "metric", "value"])
        w.writerows(summary_rows(summary))


def figure_rows(summary, trials, gap_bin=7.0, time_bin=28.0):
    """Plot data: histograms of event time since prior infusion (panel A) and
    since enrollment (panel B), plus the per-cycle infection series."""
    hist = []
    series = []
    trials = list(trials)
    if trials:
        end = trials[0].study_end
        for label in trials[0].arm_labels:
            gap = np.concatenate([t.time_since_prior_infusion[t.arm_subset(label) & t.event] for t in trials])
            s = np.concatenate([t.time[t.arm_subset(label) & t.event] for t in trials])
            for panel, vals, width in (("A", gap, gap_bin), ("B", s, time_bin)):
                hi = max(end, float(vals.max()) if vals.size else 0.0)
                edges = np.arange(0.0, hi + width, width)
                counts, _ = np.histogram(vals, bins=edges)
                total = counts.sum()
                for lo, up, c in zip(edges[:-1], edges[1:], counts):
                    hist.append([panel, label, fmt(lo), fmt(up), int(c), fmt(c / (total * width) if total else 0.0)])
    for a in summary.arms:
        for k, (r, e, p) in enumerate(zip(a.cycle_at_risk, a.cycle_events, a.cycle_prob), start=1):
            series.append([a.label, k, r, e, fmt(p)])
    return hist, series


def write_figures(summary, trials, dest):
    hist, series = figure_rows(summary, trials)
    p1 = os.path.join(dest, "figure1_histograms.csv")
    p2 = os.path.join(dest, "figure2_cycles.csv")
    with _open(p1) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["panel", "arm", "bin_lo", "bin_hi", "count", "density"])
        w.writerows(hist)
    with _open(p2) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm", "cycle", "at_risk", "events", "prob"])
        w.writerows(series)
    return p1, p2


def emit(summary, trials, dest):
    """Write outcomes, fits, summary and figure plot-data CSVs into ``dest``."""
    os.makedirs(dest, exist_ok=True)
    trials = list(trials)
    paths = {
        "outcomes": os.path.join(dest, "outcomes.csv"),
        "fits": os.path.join(dest, "fits.csv"),
        "summary": os.path.join(dest, "summary.csv"),
    }
    write_outcomes(trials, paths["outcomes"])
    write_fits(trials, paths["fits"])
    write_summary(summary, paths["summary"])
    paths["figure1"], paths["figure2"] = write_figures(summary, trials, dest)
    return paths
