"""Command-line entry point: ``cyclesurv {simulate,fit,verify,figures}``."""
from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import io
from .cox import fit, read_rows_csv
from .errors import ConfigError
from .trial import fit_trial, run_trials, summarize


def _simulate(args):
    overrides = [io.parse_override(s) for s in args.set]
    overrides.append(("master_seed", args.seed))
    if args.trials is not None:
        overrides.append(("trials", args.trials))
    if args.no_fit:
        overrides.append(("fit", False))
    cfg = io.load_config(args.config, overrides)
    t0 = time.time()
    trials = run_trials(cfg, workers=args.workers)
    summary = summarize(trials, fit=False)
    paths = io.emit(summary, trials, args.out)
    with open(os.path.join(args.out, "config.toml"), "w") as fh:
        fh.write(io.dump_config(cfg))
    print(f"simulated {cfg.trials} trial(s) in {time.time() - t0:.1f}s")
    for a in summary.arms:
        line = f"{a.label:>10}: n={a.n} events={a.events} ({a.event_fraction:.4f})"
        if a.beta_hats:
            line += f" beta_hat={a.beta_mean:.4f} (sd {a.beta_sd:.4f})"
        print(line)
    for name, p in paths.items():
        print(f"wrote {name}: {p}")
    return 0


def _fit(args):
    if args.rows:
        res = fit(read_rows_csv(args.rows), include_x=args.include_x)
        names = ["beta"] + [f"eta{j + 1}" for j in range(len(res.coef) - 1)]
        for n, c, s in zip(names, res.coef, res.se):
            print(f"{n}\t{c:.17g}\tse={s:.17g}")
        print(f"loglik\t{res.loglik:.17g}\titerations={res.iterations}\tconverged={res.converged}")
        return 0 if res.converged else 1
    trials = io.read_outcomes(args.outcomes)
    step = None if args.step == 0 else args.step
    print("trial,arm,beta_hat,se,converged,events")
    for t in trials:
        for label, f in fit_trial(t, args.z_spec, step).items():
            print(f"{t.trial},{label},{io.fmt(f.beta_hat)},{io.fmt(f.se)},{int(f.converged)},{f.events}")
    return 0


def _verify(args):
    from .verify import TIME_TOL, multi_dose_boundary_gaps, oracle_equivalence

    records = oracle_equivalence()
    failed = [r for r in records if not r.passed]
    worst = max(r.time_error for r in records)
    if args.verbose:
        for r in records:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.case} target={r.target:.6g} "
                  f"closed={r.closed:.12g} oracle={r.oracle:.12g}")
    print(f"{'PASS' if not failed else 'FAIL'} oracle equivalence: {len(records)} points, "
          f"max |T_closed - T_oracle| = {worst:.3e} d (tol {TIME_TOL:g})")
    gap = multi_dose_boundary_gaps()
    print(f"{'PASS' if gap <= 1e-8 else 'FAIL'} segment continuity: max gap {gap:.3e} d (tol 1e-08)")
    return 0 if not failed and gap <= 1e-8 else 1


def _figures(args):
    trials = io.read_outcomes(args.outcomes)
    if args.fits:
        fits = io.read_fits(args.fits)
        for t in trials:
            t.fits = fits.get(t.trial, {})
    summary = summarize(trials, fit=False)
    os.makedirs(args.out, exist_ok=True)
    io.write_summary(summary, os.path.join(args.out, "summary.csv"))
    for p in io.write_figures(summary, trials, args.out):
        print(f"wrote {p}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="cyclesurv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run trials and write CSV outputs")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, required=True, help="master seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-fit", action="store_true", help="skip per-trial Cox fits")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (TOML value syntax)")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("fit", help="fit the time-varying Cox model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rows", help="counting-process CSV (id,tstart,tstop,event,z,x1..xp)")
    src.add_argument("--outcomes", help="outcomes CSV written by simulate")
    p.add_argument("--include-x", action="store_true")
    p.add_argument("--z-spec", choices=("unclamped", "clamped"), default="unclamped")
    p.add_argument("--step", type=float, default=1.0, help="covariate step in days; 0 for exact")
    p.set_defaults(func=_fit)

    p = sub.add_parser("verify", help="cross-check generators against the numerical oracle")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_verify)

    p = sub.add_parser("figures", help="emit summary and plot-data CSVs from outcomes")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--fits", help="fits CSV written by simulate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_figures)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
