"""Cox proportional-hazards fitting with time-varying covariates.

Data enter either as counting-process rows ``(start, stop]`` or directly as
schedules plus outcomes. Both routes reduce to :class:`RiskSets`, on which
the Breslow log partial likelihood is maximized by Newton-Raphson with
step-halving.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SeparationError
from .schedule import ScheduleBatch

MAX_ITER = 100
LOGLIK_TOL = 1e-10
GRAD_TOL = 1e-8
SEPARATION_BOUND = 50.0
INFO_COLLAPSE = 1e-6


@dataclass(frozen=True)
class CountingProcessRow:
    subject_id: int
    t_start: float
    t_stop: float
    event: bool
    z: float
    x: tuple = ()


@dataclass
class FitResult:
    coef: np.ndarray
    se: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    gradient_norm: float
    trace: list = field(default_factory=list)

    @property
    def beta_hat(self):
        return float(self.coef[0])

    @property
    def beta_se(self):
        return float(self.se[0])


@dataclass(frozen=True)
class RiskSets:
    """Risk-set design grouped by distinct event time.

    ``z[start[g]:start[g + 1]]`` holds the covariates of everyone at risk at
    event time ``g``; ``d[g]`` counts events there and ``zsum[g]`` sums
    their covariates.
    """

    z: np.ndarray
    start: np.ndarray
    d: np.ndarray
    zsum: np.ndarray

    @property
    def n_events(self):
        return int(self.d.sum())

    @classmethod
    def from_blocks(cls, blocks):
        """``blocks`` is a list of ``(z_risk, z_events)`` pairs, one per event time."""
        if not blocks:
            raise DomainError("at least one event is required")
        z = np.concatenate([np.atleast_2d(b[0]).reshape(len(b[0]), -1) for b in blocks])
        sizes = [len(b[0]) for b in blocks]
        start = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        d = np.array([len(b[1]) for b in blocks], dtype=float)
        zsum = np.array([np.reshape(b[1], (len(b[1]), -1)).sum(axis=0) for b in blocks])
        return cls(z, start, d, zsum)


def log_partial_likelihood(rs: RiskSets, coef):
    """Breslow log partial likelihood, gradient and Hessian at ``coef``."""
    coef = np.atleast_1d(np.asarray(coef, dtype=float))
    eta = rs.z @ coef
    heads = rs.start[:-1]
    shift = np.maximum.reduceat(eta, heads)
    w = np.exp(eta - np.repeat(shift, np.diff(rs.start)))
    s0 = np.add.reduceat(w, heads)
    s1 = np.add.reduceat(w[:, None] * rs.z, heads)
    s2 = np.add.reduceat(w[:, None, None] * rs.z[:, :, None] * rs.z[:, None, :], heads)
    mean = s1 / s0[:, None]
    ll = float(np.sum(rs.zsum @ coef - rs.d * (np.log(s0) + shift)))
    grad = np.sum(rs.zsum - rs.d[:, None] * mean, axis=0)
    cov = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
    hess = -np.sum(rs.d[:, None, None] * cov, axis=0)
    return ll, grad, hess


def _check_variation(rs: RiskSets):
    heads = rs.start[:-1]
    lo = np.minimum.reduceat(rs.z, heads, axis=0)
    hi = np.maximum.reduceat(rs.z, heads, axis=0)
    flat = np.all(hi - lo == 0, axis=0)
    if np.any(flat):
        raise DomainError(f"no covariate variation within any risk set (columns {np.flatnonzero(flat)})")


def fit_risk_sets(rs: RiskSets, init=None, max_iter=MAX_ITER):
    """Maximize the partial likelihood by Newton-Raphson with step-halving."""
    _check_variation(rs)
    p = rs.z.shape[1]
    coef = np.zeros(p) if init is None else np.asarray(init, dtype=float).copy()
    ll, grad, hess = log_partial_likelihood(rs, coef)
    info0 = -np.diag(hess)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError("information matrix is singular") from exc
        for _ in range(60):
            cand = coef + step
            ll_new, g_new, h_new = log_partial_likelihood(rs, cand)
            if ll_new >= ll:
                break
            step = step / 2
        else:
            break
        delta = ll_new - ll
        coef, ll, grad, hess = cand, ll_new, g_new, h_new
        trace.append(ll)
        if np.max(np.abs(coef)) > SEPARATION_BOUND:
            raise SeparationError("coefficient diverges; partial likelihood is monotone")
        if abs(delta) < LOGLIK_TOL and np.linalg.norm(grad) <= GRAD_TOL:
            converged = True
            break
    if not converged and np.linalg.norm(grad) <= GRAD_TOL:
        converged = True
    if np.any(-np.diag(hess) < INFO_COLLAPSE * info0):
        # gradient vanished only because the likelihood flattened out at infinity
        raise SeparationError("information collapsed; partial likelihood is monotone")
    try:
        se = np.sqrt(np.diag(np.linalg.inv(-hess)))
    except np.linalg.LinAlgError:
        se = np.full(p, np.nan)
    return FitResult(coef, se, ll, it, converged, float(np.linalg.norm(grad)), trace)


def risk_sets_from_rows(rows, include_x=False):
    """Group counting-process rows into risk sets at each distinct event time."""
    rows = list(rows)
    if not rows:
        raise DomainError("no rows")
    start = np.array([r.t_start for r in rows])
    stop = np.array([r.t_stop for r in rows])
    event = np.array([bool(r.event) for r in rows])
    cols = [np.array([r.z for r in rows])]
    if include_x:
        xs = np.array([r.x for r in rows], dtype=float).reshape(len(rows), -1)
        cols.extend(xs.T)
    z = np.column_stack(cols)
    blocks = []
    for te in np.unique(stop[event]):
        at_risk = (start < te) & (stop >= te)
        ev = event & (stop == te)
        blocks.append((z[at_risk], z[ev]))
    return RiskSets.from_blocks(blocks)


def fit(rows, include_x=False):
    """Fit ``beta`` (and ``eta`` when ``include_x``) to counting-process rows."""
    return fit_risk_sets(risk_sets_from_rows(rows, include_x))


def discretize(tau, step):
    """Time since infusion at the start of the ``step``-wide row containing ``tau``."""
    if step is None:
        return tau
    return np.maximum(np.ceil(tau / step) - 1.0, 0.0) * step


def risk_sets_from_schedules(batch: ScheduleBatch, time, event, step=1.0, t_s=None, x=None):
    """Risk sets built directly from schedules, equivalent to expanding rows.

    ``t_s`` (scalar or per subject) clamps the covariate; ``None`` leaves it
    unclamped. ``step=None`` uses the exact time since infusion.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    clamp = None if t_s is None else np.broadcast_to(np.asarray(t_s, dtype=float), time.shape)
    if x is not None:
        x = np.asarray(x, dtype=float).reshape(len(time), -1)
    blocks = []
    for te in np.unique(time[event]):
        at_risk = time >= te
        sub = batch.times[at_risk]
        with np.errstate(invalid="ignore"):
            prior = np.where(sub < te, sub, -np.inf)
        tau = te - prior.max(axis=1)
        zval = discretize(tau, step)
        if clamp is not None:
            zval = np.minimum(zval, clamp[at_risk])
        zmat = zval[:, None] if x is None else np.column_stack([zval, x[at_risk]])
        ev = event[at_risk] & (time[at_risk] == te)
        blocks.append((zmat, zmat[ev]))
    return RiskSets.from_blocks(blocks)


def expand_counting_process(outcomes, schedules, z_spec="unclamped", t_s=None, step=1.0, x=None):
    """Expand outcomes into ``(start, stop]`` rows with piecewise-constant ``z``.

    Rows break at every infusion and every ``step`` days after it; ``z`` is
    the time since infusion at the row start, capped at ``t_s`` when
    ``z_spec == "clamped"``. ``step=None`` gives one row per infusion
    interval (so ``z`` is always 0 there).
    """
    if z_spec not in ("clamped", "unclamped"):
        raise DomainError(f"unknown z_spec {z_spec!r}")
    if step is not None and not step > 0:
        raise DomainError("step must be positive")
    if z_spec == "clamped" and t_s is None:
        raise DomainError("clamped covariate needs t_s")
    rows = []
    for i, (out, sched) in enumerate(zip(outcomes, schedules)):
        cap = None
        if z_spec == "clamped":
            cap = float(t_s[i] if np.ndim(t_s) else t_s)
        xi = () if x is None else tuple(float(v) for v in x[i])
        S = out.time
        times = list(sched.times)
        for k, t_k in enumerate(times):
            if t_k >= S:
                break
            t_next = min(times[k + 1] if k + 1 < len(times) else np.inf, S)
            if step is None:
                starts = [t_k]
            else:
                starts = (t_k + step * np.arange(int(np.ceil((t_next - t_k) / step)))).tolist()
            stops = starts[1:] + [t_next]
            for a, b in zip(starts, stops):
                zval = a - t_k
                if cap is not None:
                    zval = min(zval, cap)
                last = b == S
                rows.append(CountingProcessRow(i, a, b, bool(out.event and last), zval, xi))
    return rows


def write_rows_csv(rows, path):
    rows = list(rows)
    p = len(rows[0].x) if rows else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "tstart", "tstop", "event", "z"] + [f"x{j + 1}" for j in range(p)])
        for r in rows:
            w.writerow(
                [r.subject_id, f"{r.t_start:.17g}", f"{r.t_stop:.17g}", int(r.event), f"{r.z:.17g}"]
                + [f"{v:.17g}" for v in r.x]
            )


def read_rows_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        xcols = sorted((c for c in reader.fieldnames if c.startswith("x")), key=lambda c: int(c[1:]))
        return [
            CountingProcessRow(
                int(r["id"]),
                float(r["tstart"]),
                float(r["tstop"]),
                r["event"].strip() in ("1", "true", "True"),
                float(r["z"]),
                tuple(float(r[c]) for c in xcols),
            )
            for r in reader
        ]
