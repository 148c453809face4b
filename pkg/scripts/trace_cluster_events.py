"""Log every SCLUB split and merge against the ground-truth clusters.

    python scripts/trace_cluster_events.py [--rep K] [--horizon T]

Useful for seeing why a run has not recovered the true partition by T:
merges that join two different true clusters are flagged, and the final
clusters are listed with their members' true labels.
"""

import argparse

import numpy as np

from bandit_clusters.environment import EnvironmentSpec
from bandit_clusters.harness import ExperimentConfig, build_policy, derive_seed, environment_for, simulate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rep", type=int, default=0)
    ap.add_argument("--horizon", type=int, default=2 ** 17)
    ap.add_argument("--base-seed", type=int, default=0)
    args = ap.parse_args()

    spec = EnvironmentSpec(64, 8, 10, 10, 0.1)
    cfg = ExperimentConfig(spec, ("sclub",), horizon=args.horizon,
                           repetitions=args.rep + 1, base_seed=args.base_seed)
    env = environment_for(cfg, args.rep)
    seed = derive_seed(cfg.base_seed, args.rep)
    pol, params = build_policy(cfg, "sclub", env, seed)
    truth = env.true_cluster
    centers = np.array([env.thetas[truth == c][0] for c in range(spec.n_clusters)])
    print(f"alpha_theta={params.alpha_theta:.3f} beta={params.beta:.3f} gap={env.gap_theta:.3f}")
    print("center distances:")
    print(np.round(np.linalg.norm(centers[:, None] - centers[None], axis=-1), 2))

    def labels(members):
        return sorted(set(truth[list(members)].tolist()))

    split, merge = pol._split, pol._merge

    def on_split(user, c):
        print(f"tau={pol.global_round:7d} split user {user} (true {truth[user]}, "
              f"T_i={pol.users[user].count}) from cluster {c.cid} {labels(c.members)}")
        split(user, c)

    def on_merge(a, b):
        la, lb = labels(a.members), labels(b.members)
        mixed = "  MIXED" if la != lb or len(la) > 1 else ""
        print(f"tau={pol.global_round:7d} merge {a.cid}{la} + {b.cid}{lb}{mixed}")
        merge(a, b)

    pol._split, pol._merge = on_split, on_merge
    tr = simulate(env, pol, args.horizon, stream_seed=seed, record_every=max(1, args.horizon // 16))
    print("round  clusters  rand_index")
    for r, k, ri in zip(tr.rounds, tr.cluster_count, tr.rand_index):
        print(f"{r:7d}  {k:8d}  {ri:.3f}")
    for c in pol.clusters.values():
        counts = [pol.users[i].count for i in sorted(c.members)]
        print(f"cluster {c.cid}: true labels {sorted(truth[list(c.members)].tolist())}, "
              f"T_i in [{min(counts)}, {max(counts)}]")


if __name__ == "__main__":
    main()
