from __future__ import annotations

import numpy as np

from ..linalg import new_state
from .base import Policy, select_item, ucb_scores


class LinUCBOne(Policy):
    """One shared ridge estimate for every user."""

    name = "linucb_one"

    def __init__(self, n_users, dim, params):
        super().__init__(n_users, dim, params)
        self.state = new_state(dim)

    def recommend(self, user, items):
        return select_item(ucb_scores(self.state, items, self.params.beta))

    def update(self, user, item, y):
        self.state.absorb(item, y)

    def labels(self):
        return np.zeros(self.n_users, dtype=np.int64)


class LinUCBInd(Policy):
    """Independent ridge estimate per user."""

    name = "linucb_ind"

    def __init__(self, n_users, dim, params):
        super().__init__(n_users, dim, params)
        self.states = [new_state(dim) for _ in range(n_users)]

    def recommend(self, user, items):
        return select_item(ucb_scores(self.states[user], items, self.params.beta))

    def update(self, user, item, y):
        self.states[user].absorb(item, y)

    def labels(self):
        return np.arange(self.n_users, dtype=np.int64)
