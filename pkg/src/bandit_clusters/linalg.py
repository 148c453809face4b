"""Incremental ridge-regression statistics shared by every policy.

A :class:`RidgeState` holds the regularized Gramian ``S = I + sum x x^T``,
the moment vector ``b = sum y x`` and the observation count ``T``.  The
inverse of ``S`` and ``log det S`` are maintained alongside so that
recommendation and update cost O(d^2) per round.
"""

from __future__ import annotations

import math

import numpy as np

REFRESH_EVERY = 512
PD_TOL = 1e-10


class BookkeepingError(RuntimeError):
    """Raised when aggregate statistics become inconsistent."""


def _factor(gramian: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(inverse, log_det)`` of a symmetric PD matrix via Cholesky."""
    try:
        chol = np.linalg.cholesky(gramian)
    except np.linalg.LinAlgError as exc:
        raise BookkeepingError("gramian is not positive definite") from exc
    pivots = np.diag(chol) ** 2
    if pivots.min() < PD_TOL:
        raise BookkeepingError(
            f"gramian is numerically singular (smallest pivot {pivots.min():.3g})"
        )
    eye = np.eye(gramian.shape[0])
    chol_inv = np.linalg.solve(chol, eye)
    inverse = chol_inv.T @ chol_inv
    inverse = 0.5 * (inverse + inverse.T)
    return inverse, float(2.0 * np.log(np.diag(chol)).sum())


class RidgeState:
    """Sufficient statistics of a ridge regression with unit regularizer.

    Mutating methods work in place and return ``self`` so calls chain.
    """

    __slots__ = ("dim", "gramian", "inverse", "moment", "count", "log_det",
                 "_since_refresh", "_theta")

    def __init__(self, gramian, inverse, moment, count, log_det):
        self.dim = gramian.shape[0]
        self.gramian = gramian
        self.inverse = inverse
        self.moment = moment
        self.count = int(count)
        self.log_det = float(log_det)
        self._since_refresh = 0
        self._theta = None

    def __repr__(self):
        return f"RidgeState(dim={self.dim}, count={self.count}, log_det={self.log_det:.6g})"

    def copy(self) -> "RidgeState":
        out = RidgeState(self.gramian.copy(), self.inverse.copy(), self.moment.copy(),
                         self.count, self.log_det)
        out._since_refresh = self._since_refresh
        return out

    def absorb(self, x: np.ndarray, y: float) -> "RidgeState":
        """Add one observation ``(x, y)``; the inverse gets a rank-1 update.

        Items are expected inside the unit ball; this is not re-checked here.
        """
        sx = self.inverse @ x
        denom = 1.0 + float(x @ sx)
        self.inverse -= np.outer(sx / denom, sx)
        self.gramian += np.outer(x, x)
        self.moment += y * x
        self.count += 1
        self.log_det += math.log(denom)
        self._theta = None
        self._since_refresh += 1
        if self._since_refresh >= REFRESH_EVERY:
            self.refresh()
        return self

    def refresh(self) -> "RidgeState":
        """Recompute inverse and log-determinant from the Gramian."""
        self.inverse, self.log_det = _factor(self.gramian)
        self._since_refresh = 0
        self._theta = None
        return self

    def estimate(self) -> np.ndarray:
        """Ridge estimate ``S^-1 b`` (cached until the next mutation)."""
        if self._theta is None:
            self._theta = self.inverse @ self.moment
        return self._theta

    def mahalanobis(self, x: np.ndarray) -> float:
        return math.sqrt(max(float(x @ self.inverse @ x), 0.0))

    def widths(self, items: np.ndarray) -> np.ndarray:
        """Row-wise ``||x||_{S^-1}`` for an ``(L, d)`` item matrix."""
        q = np.einsum("ij,jk,ik->i", items, self.inverse, items)
        return np.sqrt(np.maximum(q, 0.0))


def new_state(dim: int) -> RidgeState:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return RidgeState(np.eye(dim), np.eye(dim), np.zeros(dim), 0, 0.0)


def absorb(state: RidgeState, x: np.ndarray, y: float) -> RidgeState:
    return state.absorb(x, y)


def estimate(state: RidgeState) -> np.ndarray:
    return state.estimate()


def mahalanobis(state: RidgeState, x: np.ndarray) -> float:
    return state.mahalanobis(x)


def _from_sums(gramian, moment, count) -> RidgeState:
    if count < 0:
        raise BookkeepingError(f"negative observation count {count}")
    inverse, log_det = _factor(gramian)
    return RidgeState(gramian, inverse, moment, count, log_det)


def retire(state: RidgeState, sub: RidgeState) -> RidgeState:
    """Remove the observations held by ``sub`` from ``state``.

    ``sub`` must describe a subset of the observations in ``state``.  Inverse
    and log-determinant are recomputed from scratch.
    """
    if state.dim != sub.dim:
        raise ValueError(f"dimension mismatch: {state.dim} vs {sub.dim}")
    gramian = state.gramian - sub.gramian + np.eye(state.dim)
    return _from_sums(gramian, state.moment - sub.moment, state.count - sub.count)


def combine(a: RidgeState, b: RidgeState) -> RidgeState:
    """Pool the observations of two states (``S_a + S_b - I``)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    gramian = a.gramian + b.gramian - np.eye(a.dim)
    return _from_sums(gramian, a.moment + b.moment, a.count + b.count)


def pool(states, dim: int) -> RidgeState:
    """Aggregate ``I + sum (S_i - I)`` over any number of states."""
    gramian = np.eye(dim)
    moment = np.zeros(dim)
    count = 0
    for s in states:
        gramian += s.gramian
        gramian -= np.eye(dim)
        moment += s.moment
        count += s.count
    return _from_sums(gramian, moment, count)
