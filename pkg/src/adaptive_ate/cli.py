"""Command-line front end.

    adaptive-ate simulate  --config cfg.yaml --out results/
    adaptive-ate infer     --stream data.csv --config cfg.yaml --out intervals.csv
    adaptive-ate aggregate --trajectories 'results/*.csv' --out aggregate.csv
    adaptive-ate selfcheck

Exit codes: 0 ok, 2 config error, 3 data validation error, 4 self-check failure.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import sys
from pathlib import Path

from .core import ConfigError, DataValidationError, seeded_rng
from .selfcheck import MUTATIONS, run_selfcheck
from .sim.aggregate import aggregate
from .sim.config import ExperimentConfig, load_config
from .sim.dgp import make_dgp
from .sim.experiment import (
    FOLD_STREAM,
    InferenceEngine,
    build_regressor,
    outcome_range_for,
    run_many,
)
from .sim.io import (
    TRAJECTORY_HEADER,
    read_stream,
    read_trajectories,
    trajectory_row,
    write_aggregate,
    write_stream,
    write_trajectories,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SELFCHECK = 0, 2, 3, 4


def _overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "iters", None) is not None:
        changes["n_iters"] = args.iters
    if getattr(args, "methods", None):
        changes["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes).validate(require_dgp=cfg.dgp is not None) if changes else cfg


def _summary_table(res) -> str:
    lines = [f"{'method':<8} {'cum_miscoverage':>16} {'cum_power':>10} {'mean_width':>11}"]
    for m, miss, power, width in res.summary():
        lines.append(f"{m:<8} {miss:>16.4f} {power:>10.4f} {width:>11.5f}")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    cfg = _overrides(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajs = run_many(cfg)
    if cfg.write_trajectories:
        with open(out / "trajectory.csv", "w", newline="") as fh:
            write_trajectories(trajs, fh)
    if cfg.write_streams:
        (out / "streams").mkdir(exist_ok=True)
        for tr in trajs:
            write_stream(tr, out / "streams" / f"iter_{tr.iter_id:04d}.csv")
    res = aggregate(trajs)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        write_aggregate(res, fh)
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    if not args.quiet:
        print(f"{cfg.n_iters} iteration(s) of {cfg.dgp}, T={cfg.T}, alpha={cfg.alpha}")
        print(_summary_table(res))
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _overrides(load_config(args.config, require_dgp=False), args)
    dgp = make_dgp(cfg.dgp, cfg.theta0) if cfg.dgp is not None else None
    rng_ = outcome_range_for(cfg, dgp)
    theta0 = None if dgp is None else dgp.theta0
    if cfg.theta0 is not None:
        theta0 = cfg.theta0
    engine = InferenceEngine(cfg, build_regressor(cfg, dgp), rng_,
                             seeded_rng(cfg.seed, args.iter_id, FOLD_STREAM))
    with open(args.stream, newline="") as src, open(args.out, "w", newline="") as dst:
        w = csv.writer(dst, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t, x, a, y, pi1, k in read_stream(src):
            try:
                rec, ivs = engine.step(t, x, a, y, pi1, k)
            except DataValidationError as err:
                raise DataValidationError(f"t={t}: {err}") from None
            for m, iv in ivs.items():
                w.writerow(trajectory_row(args.iter_id, t, m, iv, theta0, rec.h, pi1, k))
            dst.flush()
    if not args.quiet:
        print(f"processed {engine.t} row(s) -> {args.out}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    paths = sorted(glob.glob(args.trajectories))
    if not paths:
        raise DataValidationError(f"no files match {args.trajectories!r}")
    res, _ = read_trajectories(paths)
    with open(args.out, "w", newline="") as fh:
        write_aggregate(res, fh)
    if not args.quiet:
        print(_summary_table(res))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    echo = None if args.quiet else print
    return EXIT_OK if run_selfcheck(tuple(args.mutate or ()), echo=echo) else EXIT_SELFCHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-ate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run Monte Carlo experiments from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--iters", type=int)
    s.add_argument("--methods", help="comma-separated subset of clt,hedged,prpi,asymp")
    s.add_argument("--workers", type=int)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("infer", help="replay a logged experiment and emit intervals per step")
    s.add_argument("--stream", required=True, help="CSV with t, x1.., a, y, pi1, k")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--iter-id", type=int, default=0,
                   help="fold stream index (matches the simulate iteration)")
    s.add_argument("--methods")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("aggregate", help="reduce trajectory CSVs into miscoverage/power curves")
    s.add_argument("--trajectories", required=True, help="glob of trajectory CSV files")
    s.add_argument("--out", required=True)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("selfcheck", help="run the fast invariant suite")
    s.add_argument("--mutate", action="append", choices=MUTATIONS,
                   help="deliberately break a primitive (the check must then fail)")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataValidationError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
