"""Command-line entry point::

    bandit-clusters run CONFIG --out DIR [--seeds N] [--horizon T] [--algos a,b] [--dry-run]
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import config_to_dict, load_config
from .environment import ConfigError, WeightFileError
from .harness import (
    GENERATOR,
    SEEDING,
    aggregate,
    derive_seed,
    environment_for,
    run_experiment,
    worker_count,
)
from .linalg import BookkeepingError
from .policies import make_params
from .svg import plot_regret

log = logging.getLogger("bandit_clusters")


def _num(v) -> str:
    return repr(float(v))


def write_trace_csv(path: Path, trace) -> int:
    header = ["round", "cumulative_regret"]
    cols = [trace.rounds, trace.cumulative_regret]
    if trace.cluster_count is not None:
        header.append("cluster_count")
        cols.append(trace.cluster_count)
    if trace.rand_index is not None:
        header.append("rand_index")
        cols.append(trace.rand_index)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([int(row[0]), _num(row[1])]
                       + [int(v) if h == "cluster_count" else _num(v)
                          for h, v in zip(header[2:], row[2:])])
    return len(trace.rounds)


def write_bundle(out: Path, cfg, traces: dict, params: dict, elapsed: float, plot: bool = True):
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    rows = {}
    aggs = []
    for algo, runs in traces.items():
        for rep, tr in enumerate(runs):
            name = f"traces/{algo}_rep{rep}.csv"
            rows[name] = write_trace_csv(out / name, tr)
        agg = aggregate(runs)
        aggs.append(agg)
        name = f"mean_{algo}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "mean_cumulative_regret", "std_error"])
            for r, m, s in zip(agg.rounds, agg.mean_trace, agg.stderr_trace):
                w.writerow([int(r), _num(m), _num(s)])
        rows[name] = len(agg.rounds)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "repetitions", "horizon", "mean_final_regret", "std_error"])
        for a in aggs:
            w.writerow([a.algorithm, a.repetitions, cfg.horizon, _num(a.mean_final_regret),
                        _num(a.std_error)])
    rows["aggregate.csv"] = len(aggs)
    if plot:
        (out / "regret.svg").write_text(plot_regret(aggs, title=f"Cumulative regret, T={cfg.horizon}"))
    meta = {
        "config": config_to_dict(cfg),
        "generator": GENERATOR,
        "seeding": SEEDING,
        "repetition_seeds": [derive_seed(cfg.base_seed, r) for r in range(cfg.repetitions)],
        "params_rep0": params,
        "rows": rows,
        "versions": {"bandit_clusters": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": round(elapsed, 3),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return aggs


def _apply_flags(cfg, args):
    changes = {}
    if args.seeds is not None:
        changes["repetitions"] = args.seeds
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.algos:
        changes["algorithms"] = tuple(a.strip() for a in args.algos.split(",") if a.strip())
    if changes:
        cfg = replace(cfg, **changes)
        cfg.validate()
    return cfg


def derived_params(cfg) -> dict:
    env = environment_for(cfg, 0)
    out = {}
    for algo in cfg.algorithms:
        p = make_params(algo, env, cfg.horizon, cfg.param_mode, cfg.overrides)
        out[algo] = {"alpha_theta": p.alpha_theta, "alpha_p": p.alpha_p, "beta": p.beta}
    out["_environment"] = {"lambda_x_est": env.lambda_x_est, "gap_theta": env.gap_theta,
                           "gap_freq": env.gap_freq}
    return out


def cmd_run(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    params = derived_params(cfg)
    if args.dry_run:
        print(json.dumps(params, indent=2, sort_keys=True))
        return 0
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc.strerror}", file=sys.stderr)
        return 3
    start = time.perf_counter()
    traces = run_experiment(cfg, workers=worker_count())
    aggs = write_bundle(out, cfg, traces, params, time.perf_counter() - start,
                        plot=not args.no_plot)
    for a in aggs:
        print(f"{a.algorithm:11s} final regret {a.mean_final_regret:12.3f} +- {a.std_error:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bandit-clusters",
                                description="Online clustering of bandits simulation suite.")
    p.add_argument("-v", "--verbose", action="store_true", help="per-repetition log lines")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="JSON experiment config")
    r.add_argument("--out", default="results", help="output directory")
    r.add_argument("--seeds", type=int, help="override the number of repetitions")
    r.add_argument("--horizon", type=int, help="override the horizon T")
    r.add_argument("--algos", help="comma-separated subset of algorithms")
    r.add_argument("--dry-run", action="store_true",
                   help="validate and print derived parameters without simulating")
    r.add_argument("--no-plot", action="store_true", help="skip the SVG plot")
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, WeightFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BookkeepingError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
