"""Command-line entry point: ``flockmf simulate|couple|sweep|validate``."""
import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .config import Config, load_config
from .coupling import alignment_gap, alignment_gap_bound, coupled_run, sweep
from .diagnostics import record
from .exceptions import BlowupError, ConfigError, InvalidParameterError
from .initial import sample_initial
from .io import report_document, write_manifest, write_report, write_trajectory
from .noise import NoisePlan
from .particles import simulate

OUT_ENV = "FLOCKMF_OUT_DIR"

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3

log = logging.getLogger("flockmf")


def _out_dir(args, cfg):
    out = args.out or os.environ.get(OUT_ENV) or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(cfg, out):
    p = cfg.params()
    init = sample_initial(cfg.initial, cfg.n, cfg.d, cfg.seed)
    traj = simulate(init, p, cfg.t_final, cfg.dt, NoisePlan(cfg.seed, cfg.d, cfg.dt),
                    save_every=cfg.save_every)
    traj_path = os.path.join(out, "trajectory.csv")
    write_trajectory(traj, traj_path)
    recs = [record(traj[0], p, cfg.k), record(traj[-1], p, cfg.k)]
    report = {"kind": "simulate", "n": cfg.n, "params": p.as_dict(),
              "schedule": cfg.schedule().as_dict() if cfg.use_schedule else None,
              "diagnostics": [dict(r.__dict__, functional=r.functional) for r in recs]}
    rep_path = os.path.join(out, "report.json")
    write_report(report, rep_path)
    return [traj_path, rep_path]


def cmd_couple(cfg, out):
    p = cfg.params()
    seeds = [cfg.seed + r for r in range(cfg.reps)]
    gaps = []

    def on_paths(paths):
        per, worst = alignment_gap(paths, p.xi)
        bound = alignment_gap_bound(paths, p.xi, p.d)
        gaps.append({"seed": paths.seed, "alignment_gap_max": worst,
                     "alignment_gap_mean": float(per.mean()),
                     "gap_bound_mean": float(bound.mean())})

    rep = coupled_run(cfg.n, cfg.m, p, cfg.t_final, cfg.dt, seeds, initial=cfg.initial,
                      schedule=cfg.schedule(), max_iters=cfg.picard_max_iters,
                      tol=cfg.picard_tol, callback=on_paths)
    doc = report_document(rep)
    doc["kind"] = "couple"
    doc["alignment"] = gaps
    path = os.path.join(out, "report.json")
    write_report(doc, path)
    print(f"N={rep.n} M={rep.m} sup-error {rep.sup_error:.6e} +- {rep.half_width:.2e}")
    return [path]


def cmd_sweep(cfg, out):
    if not cfg.use_schedule:
        raise ConfigError("eps,delta,nu", "sweep requires schedule mode (alpha)")
    rep = sweep(cfg.n_list, cfg.alpha, cfg.reps, cfg.params(max(cfg.n_list)), cfg.t_final,
                cfg.dt, m_multiplier=cfg.m_multiplier, eps_max=cfg.eps_max,
                delta_max=cfg.delta_max, seed=cfg.seed, initial=cfg.initial,
                max_iters=cfg.picard_max_iters, tol=cfg.picard_tol,
                progress=lambda c: print(f"N={c.n} sup-error {c.sup_error:.6e}", flush=True))
    path = os.path.join(out, "sweep.json")
    write_report(rep, path)
    print(f"slope {rep.slope:.4f} +- {rep.half_width:.4f}")
    return [path]


def cmd_validate(cfg, out, full=False):
    from .validation import run_checks
    results = run_checks(full=full)
    doc = [{"name": r.name, "passed": bool(r.passed), "detail": r.detail,
            "elapsed": float(r.elapsed)} for r in results]
    path = os.path.join(out, "validation.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return [path], all(r.passed for r in results)


def build_parser():
    ap = argparse.ArgumentParser(prog="flockmf", description=__doc__)
    ap.add_argument("command", choices=["simulate", "couple", "sweep", "validate"])
    ap.add_argument("--config", help="TOML config file (defaults if omitted)")
    ap.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and out_dir)")
    ap.add_argument("--seed", type=int, help="override the config seed (u64)")
    ap.add_argument("--threads", type=int, help="worker threads for the pair loops")
    ap.add_argument("--full", action="store_true",
                    help="validate: include the mean-field decay sweep (slow)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = load_config(args.config) if args.config else Config()
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.threads is not None:
            import numba
            if not 1 <= args.threads <= numba.config.NUMBA_NUM_THREADS:
                raise ConfigError("threads", f"must be in 1..{numba.config.NUMBA_NUM_THREADS}")
            numba.set_num_threads(args.threads)
        out = _out_dir(args, cfg)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    try:
        if args.command == "simulate":
            files = cmd_simulate(cfg, out)
        elif args.command == "couple":
            files = cmd_couple(cfg, out)
        elif args.command == "sweep":
            files = cmd_sweep(cfg, out)
        else:
            files, ok = cmd_validate(cfg, out, full=args.full)
            status = EXIT_OK if ok else EXIT_VALIDATION
    except (ConfigError, InvalidParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    sched = cfg.schedule() if cfg.use_schedule and cfg.n >= 2 else None
    write_manifest(out, cfg, files, started, schedule=sched, command=args.command)
    return status


if __name__ == "__main__":
    sys.exit(main())
