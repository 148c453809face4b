from __future__ import annotations

import numpy as np

from ..linalg import RidgeState

TIE_RTOL = 1e-12


def select_item(scores: np.ndarray) -> int:
    """Argmax with near-ties (relative 1e-12) resolved to the lowest index."""
    best = scores.max()
    return int(np.argmax(scores >= best - TIE_RTOL * abs(best)))


def ucb_scores(state: RidgeState, items: np.ndarray, beta: float) -> np.ndarray:
    """``theta_hat^T x + beta * ||x||_{S^-1}`` for each row of ``items``."""
    quad = ((items @ state.inverse) * items).sum(axis=1)
    return items @ state.estimate() + beta * np.sqrt(np.maximum(quad, 0.0))


class Policy:
    """Common driver: ``step`` = recommend, observe, update."""

    name = "policy"

    def __init__(self, n_users: int, dim: int, params):
        self.n_users = n_users
        self.dim = dim
        self.params = params

    def recommend(self, user: int, items: np.ndarray) -> int:
        raise NotImplementedError

    def update(self, user: int, item: np.ndarray, y: float) -> None:
        raise NotImplementedError

    def step(self, user: int, items: np.ndarray, feedback) -> int:
        k = self.recommend(user, items)
        self.update(user, items[k], feedback(k))
        return k

    def labels(self) -> np.ndarray:
        raise NotImplementedError

    def n_clusters(self) -> int:
        return len(np.unique(self.labels()))

    def audit(self, tol: float = 1e-6) -> None:
        """Check internal aggregate bookkeeping; raises on breach."""
