"""Set-based clustering of bandits with split and merge over user sets."""

from __future__ import annotations

import numpy as np

from ..linalg import BookkeepingError, combine, new_state, pool, retire
from .base import Policy, select_item, ucb_scores
from .params import confidence_radius


class Cluster:
    """A running cluster: member set, pooled statistics and its pivot."""

    __slots__ = ("cid", "members", "state", "pivot_theta", "pivot_count",
                 "n_checked", "_hist", "t_min", "t_max")

    def __init__(self, cid, members, state, pivot_theta, pivot_count, n_checked, counts):
        self.cid = cid
        self.members = set(members)
        self.state = state
        self.pivot_theta = pivot_theta
        self.pivot_count = pivot_count
        self.n_checked = n_checked
        self._rebuild_hist(counts)

    def _rebuild_hist(self, counts):
        hist = {}
        for c in counts:
            hist[c] = hist.get(c, 0) + 1
        self._hist = hist
        self.t_min = min(hist)
        self.t_max = max(hist)

    def bump(self, old: int) -> None:
        # One member's count went old -> old + 1; min/max stay exact in O(1).
        hist = self._hist
        left = hist[old] - 1
        if left:
            hist[old] = left
        else:
            del hist[old]
            if old == self.t_min:
                self.t_min = old + 1
        hist[old + 1] = hist.get(old + 1, 0) + 1
        if old + 1 > self.t_max:
            self.t_max = old + 1

    @property
    def checked(self) -> bool:
        return self.n_checked == len(self.members)


class SCLUB(Policy):
    name = "sclub"

    def __init__(self, n_users, dim, params):
        super().__init__(n_users, dim, params)
        self.users = [new_state(dim) for _ in range(n_users)]
        self.checked = [False] * n_users
        self.assignment = [1] * n_users
        root = Cluster(1, range(n_users), new_state(dim), np.zeros(dim), 0, 0, [0] * n_users)
        self.clusters: dict[int, Cluster] = {1: root}
        self.next_cluster_id = 2
        self.phase = 0
        self.round_in_phase = 0
        self.global_round = 0

    # phases ---------------------------------------------------------------

    def phase_begin(self) -> None:
        self.phase += 1
        self.round_in_phase = 0
        self.checked = [False] * self.n_users
        for c in self.clusters.values():
            c.n_checked = 0
            c.pivot_theta = c.state.estimate().copy()
            c.pivot_count = c.state.count

    def begin_round(self) -> int:
        """Advance ``(s, t, tau)``, opening a new phase after ``2^s`` rounds."""
        if self.phase == 0 or self.round_in_phase == 2 ** self.phase:
            self.phase_begin()
        self.round_in_phase += 1
        self.global_round = 2 ** self.phase - 2 + self.round_in_phase
        return self.global_round

    # per-round operations ---------------------------------------------------

    def recommend(self, user, items):
        state = self.clusters[self.assignment[user]].state
        return select_item(ucb_scores(state, items, self.params.beta))

    def update(self, user, item, y):
        us = self.users[user]
        old = us.count
        us.absorb(item, y)
        c = self.clusters[self.assignment[user]]
        c.state.absorb(item, y)
        c.bump(old)

    def split_check(self, user: int) -> bool:
        """Move ``user`` to a fresh singleton if inconsistent with its cluster."""
        c = self.clusters[self.assignment[user]]
        if len(c.members) < 2:
            return False
        us = self.users[user]
        T_i = us.count
        a = self.params
        theta_gap = float(np.linalg.norm(us.estimate() - c.pivot_theta))
        split = theta_gap > a.alpha_theta * (confidence_radius(T_i) + confidence_radius(c.pivot_count))
        if not split:
            tau = self.global_round
            spread = max(c.t_max - T_i, T_i - c.t_min) / tau
            split = spread > 2.0 * a.alpha_p * confidence_radius(tau)
        if split:
            self._split(user, c)
        return split

    def _split(self, user: int, c: Cluster) -> None:
        us = self.users[user]
        flag = int(self.checked[user])
        c.state = retire(c.state, us)
        c.members.discard(user)
        c.n_checked -= flag
        c._rebuild_hist(self.users[i].count for i in c.members)
        cid = self.next_cluster_id
        self.next_cluster_id += 1
        self.clusters[cid] = Cluster(cid, [user], us.copy(), us.estimate().copy(),
                                     us.count, flag, [us.count])
        self.assignment[user] = cid

    def mark_checked(self, user: int) -> None:
        if not self.checked[user]:
            self.checked[user] = True
            self.clusters[self.assignment[user]].n_checked += 1

    def merge_pass(self) -> int:
        """Merge consistent checked clusters to a fixpoint; returns merge count."""
        merges = 0
        while True:
            pair = self._first_mergeable()
            if pair is None:
                return merges
            self._merge(*pair)
            merges += 1

    def _first_mergeable(self):
        # dict order is ascending cluster id: ids are issued monotonically
        # and a merge always keeps the smaller id in place.
        ready = [c for c in self.clusters.values() if c.n_checked == len(c.members)]
        k = len(ready)
        if k < 2:
            return None
        a = self.params
        tau = self.global_round
        est = np.array([c.state.estimate() for c in ready])
        counts = np.array([c.state.count for c in ready], dtype=float)
        sizes = np.array([len(c.members) for c in ready], dtype=float)
        F = confidence_radius(counts)
        freq = counts / (sizes * tau)
        diff = est[:, None, :] - est[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=-1))
        ok = dist < 0.5 * a.alpha_theta * (F[:, None] + F[None, :])
        ok &= np.abs(freq[:, None] - freq[None, :]) < a.alpha_p * confidence_radius(tau)
        ok &= np.triu(np.ones((k, k), dtype=bool), 1)
        flat = int(np.argmax(ok))
        if not ok.flat[flat]:
            return None
        return ready[flat // k], ready[flat % k]

    def _merge(self, keep: Cluster, gone: Cluster) -> None:
        keep.state = combine(keep.state, gone.state)
        for i in gone.members:
            self.assignment[i] = keep.cid
        keep.members |= gone.members
        keep.n_checked += gone.n_checked
        keep._rebuild_hist(self.users[i].count for i in keep.members)
        del self.clusters[gone.cid]

    def step(self, user, items, feedback):
        self.begin_round()
        k = self.recommend(user, items)
        self.update(user, items[k], feedback(k))
        self.split_check(user)
        self.mark_checked(user)
        self.merge_pass()
        return k

    # inspection -----------------------------------------------------------

    def user_frequency(self, user: int) -> float:
        return self.users[user].count / self.global_round if self.global_round else 0.0

    def labels(self):
        return np.asarray(self.assignment, dtype=np.int64)

    def n_clusters(self):
        return len(self.clusters)

    def audit(self, tol=1e-6):
        seen = set()
        for cid, c in self.clusters.items():
            if not c.members:
                raise BookkeepingError(f"cluster {cid} is empty")
            if c.members & seen:
                raise BookkeepingError(f"cluster {cid} overlaps another cluster")
            seen |= c.members
            if any(self.assignment[i] != cid for i in c.members):
                raise BookkeepingError(f"assignment disagrees with members of {cid}")
            ref = pool((self.users[i] for i in c.members), self.dim)
            if (c.state.count != ref.count
                    or np.abs(c.state.gramian - ref.gramian).max() > tol
                    or np.abs(c.state.moment - ref.moment).max() > tol):
                raise BookkeepingError(f"cluster {cid} aggregate drifted from its members")
            nc = sum(self.checked[i] for i in c.members)
            if nc != c.n_checked:
                raise BookkeepingError(f"cluster {cid} checked count {c.n_checked} != {nc}")
            counts = [self.users[i].count for i in c.members]
            if (min(counts), max(counts)) != (c.t_min, c.t_max):
                raise BookkeepingError(f"cluster {cid} count range is stale")
            if cid >= self.next_cluster_id:
                raise BookkeepingError(f"cluster id {cid} not below next id")
        if seen != set(range(self.n_users)):
            raise BookkeepingError("clusters do not cover all users")
        if self.global_round != 2 ** self.phase - 2 + self.round_in_phase and self.phase:
            raise BookkeepingError("round counter out of step with phase")
