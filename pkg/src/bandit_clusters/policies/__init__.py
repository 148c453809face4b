"""Bandit policies sharing one ``recommend``/``update``/``step`` interface."""

from __future__ import annotations

import logging

from .base import Policy, select_item, ucb_scores
from .club import CLUB, initial_graph
from .linucb import LinUCBInd, LinUCBOne
from .params import PolicyParams, confidence_radius, derive_params
from .sclub import SCLUB, Cluster

ALGORITHMS = ("sclub", "club", "linucb_one", "linucb_ind")

log = logging.getLogger(__name__)

__all__ = [
    "ALGORITHMS", "CLUB", "Cluster", "LinUCBInd", "LinUCBOne", "Policy", "PolicyParams",
    "SCLUB", "confidence_radius", "derive_params", "initial_graph", "make_params",
    "make_policy", "select_item", "ucb_scores",
]


def make_params(algorithm: str, env, horizon: int, mode: str = "theoretical",
                overrides: dict | None = None) -> PolicyParams:
    """Parameters for ``algorithm`` on ``env``.

    ``beta`` uses the ground-truth cluster count for the clustering policies,
    ``m = 1`` for LinUCB-One and ``m = n_users`` for LinUCB-Ind.
    """
    spec = env.spec
    if algorithm == "linucb_one":
        m = 1
    elif algorithm == "linucb_ind":
        m = spec.n_users
    else:
        m = spec.n_clusters
        if not env.has_ground_truth and mode == "theoretical":
            log.warning("no ground-truth clustering: beta for %s uses m = n_users = %d",
                        algorithm, m)
    return derive_params(mode, noise_std=spec.noise_std, lambda_x=env.lambda_x_est,
                         dim=spec.dim, horizon=horizon, n_clusters=m, n_users=spec.n_users,
                         overrides=overrides)


def make_policy(algorithm: str, env, params: PolicyParams, graph: str = "complete",
                rng=None) -> Policy:
    n, d = env.spec.n_users, env.spec.dim
    if algorithm == "sclub":
        return SCLUB(n, d, params)
    if algorithm == "club":
        return CLUB(n, d, params, graph=graph, rng=rng)
    if algorithm == "linucb_one":
        return LinUCBOne(n, d, params)
    if algorithm == "linucb_ind":
        return LinUCBInd(n, d, params)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
