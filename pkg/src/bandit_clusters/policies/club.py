"""Graph-based clustering of bandits: clusters are connected components and
learning only deletes edges."""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..linalg import BookkeepingError, new_state, pool
from .base import Policy, select_item, ucb_scores
from .params import confidence_radius

GRAPH_INITS = ("complete", "erdos_renyi")


def initial_graph(n_users: int, kind: str = "complete", rng=None) -> np.ndarray:
    """Symmetric boolean adjacency without self-loops.

    ``erdos_renyi`` keeps each edge with probability ``3 ln(n) / n``.
    """
    if kind == "complete":
        adj = np.ones((n_users, n_users), dtype=bool)
    elif kind == "erdos_renyi":
        if rng is None:
            raise ValueError("erdos_renyi initialization needs an rng")
        p = min(1.0, 3.0 * math.log(n_users) / n_users) if n_users > 1 else 1.0
        upper = np.triu(rng.random((n_users, n_users)) < p, 1)
        adj = upper | upper.T
    else:
        raise ValueError(f"unknown graph init {kind!r}; expected one of {GRAPH_INITS}")
    np.fill_diagonal(adj, False)
    return adj


class CLUB(Policy):
    name = "club"

    def __init__(self, n_users, dim, params, graph: str = "complete", rng=None):
        super().__init__(n_users, dim, params)
        self.users = [new_state(dim) for _ in range(n_users)]
        self.estimates = np.zeros((n_users, dim))
        self.counts = np.zeros(n_users, dtype=np.int64)
        self.adj = initial_graph(n_users, graph, rng)
        self.comp_of = np.zeros(n_users, dtype=np.int64)
        self.components: dict[int, tuple[np.ndarray, object]] = {}
        self.next_component_id = 0
        self.deletions = 0
        n_comp, labels = connected_components(csr_matrix(self.adj), directed=False)
        for lab in range(n_comp):
            self._new_component(np.flatnonzero(labels == lab), new_state(dim))

    def _new_component(self, members, state, cid=None):
        if cid is None:
            cid = self.next_component_id
            self.next_component_id += 1
        self.components[cid] = (members, state)
        self.comp_of[members] = cid
        return cid

    def recommend(self, user, items):
        state = self.components[self.comp_of[user]][1]
        return select_item(ucb_scores(state, items, self.params.beta))

    def update(self, user, item, y):
        us = self.users[user]
        us.absorb(item, y)
        self.estimates[user] = us.estimate()
        self.counts[user] += 1
        self.components[self.comp_of[user]][1].absorb(item, y)
        self._prune(user)

    def _prune(self, user: int) -> None:
        nbrs = np.flatnonzero(self.adj[user])
        if nbrs.size == 0:
            return
        diff = self.estimates[nbrs] - self.estimates[user]
        dist = np.sqrt((diff * diff).sum(axis=1))
        thr = self.params.alpha_theta * (confidence_radius(int(self.counts[user]))
                                         + confidence_radius(self.counts[nbrs].astype(float)))
        cut = nbrs[dist > thr]
        if cut.size == 0:
            return
        self.adj[user, cut] = False
        self.adj[cut, user] = False
        self.deletions += int(cut.size)
        self._recompute(user)

    def _recompute(self, user: int) -> None:
        cid = int(self.comp_of[user])
        members, _ = self.components[cid]
        sub = self.adj[np.ix_(members, members)]
        n_comp, labels = connected_components(csr_matrix(sub), directed=False)
        if n_comp == 1:
            return
        del self.components[cid]
        pieces = [members[labels == lab] for lab in range(n_comp)]
        pieces.sort(key=lambda p: (user not in p, p.min()))
        for k, piece in enumerate(pieces):
            state = pool((self.users[i] for i in piece), self.dim)
            self._new_component(piece, state, cid if k == 0 else None)

    def labels(self):
        return self.comp_of.copy()

    def n_clusters(self):
        return len(self.components)

    def audit(self, tol=1e-6):
        n_comp, labels = connected_components(csr_matrix(self.adj), directed=False)
        if n_comp != len(self.components):
            raise BookkeepingError(f"{len(self.components)} cached components, graph has {n_comp}")
        covered = np.zeros(self.n_users, dtype=np.int64)
        for cid, (members, state) in self.components.items():
            covered[members] += 1
            if len(np.unique(labels[members])) != 1 or np.sum(labels == labels[members[0]]) != len(members):
                raise BookkeepingError(f"component {cid} is not a connected component")
            ref = pool((self.users[i] for i in members), self.dim)
            if (state.count != ref.count
                    or np.abs(state.gramian - ref.gramian).max() > tol
                    or np.abs(state.moment - ref.moment).max() > tol):
                raise BookkeepingError(f"component {cid} aggregate drifted from its members")
        if not np.all(covered == 1):
            raise BookkeepingError("components do not partition the users")
