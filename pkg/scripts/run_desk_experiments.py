"""Run the three frequency regimes and summarize SCLUB against the baselines.

    python scripts/run_desk_experiments.py --out results [--horizon T] [--seeds N]

Each regime writes a full output bundle under ``OUT/<regime>/``.
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from bandit_clusters.cli import derived_params, write_bundle
from bandit_clusters.config import load_config
from bandit_clusters.harness import aggregate, run_experiment, worker_count

CONFIGS = Path(__file__).parent / "configs"
REGIMES = ("uniform", "per_cluster", "per_user")


def summarize(name, traces):
    finals = {a: aggregate(t).mean_final_regret for a, t in traces.items()}
    line = "  ".join(f"{a}={v:.1f}" for a, v in finals.items())
    print(f"[{name}] {line}")
    if "sclub" in finals and "club" in finals:
        print(f"[{name}] SCLUB improvement over CLUB: "
              f"{100 * (1 - finals['sclub'] / finals['club']):.2f}%")
    for tr in traces.get("sclub", []):
        if tr.rand_index is not None:
            print(f"[{name}]   seed {tr.seed}: clusters={tr.cluster_count[-1]} "
                  f"rand_index={tr.rand_index[-1]:.3f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--regimes", default=",".join(REGIMES))
    args = ap.parse_args()
    for regime in args.regimes.split(","):
        cfg = load_config(CONFIGS / f"desk_{regime}.json")
        changes = {k: v for k, v in (("horizon", args.horizon), ("repetitions", args.seeds)) if v}
        if changes:
            cfg = replace(cfg, **changes)
            cfg.validate()
        start = time.perf_counter()
        traces = run_experiment(cfg, workers=worker_count())
        write_bundle(Path(args.out) / regime, cfg, traces, derived_params(cfg),
                     time.perf_counter() - start)
        summarize(regime, traces)


if __name__ == "__main__":
    main()
