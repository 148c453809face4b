"""Exploration and clustering thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PARAM_MODES = ("theoretical", "manual")


@dataclass(frozen=True)
class PolicyParams:
    alpha_theta: float
    alpha_p: float
    beta: float
    inputs: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {"alpha_theta": self.alpha_theta, "alpha_p": self.alpha_p,
                "beta": self.beta, "inputs": dict(self.inputs)}


def confidence_radius(T):
    """``F(T) = sqrt((1 + ln(1 + T)) / (1 + T))``; accepts scalars or arrays."""
    if isinstance(T, np.ndarray):
        return np.sqrt((1.0 + np.log1p(T)) / (1.0 + T))
    return math.sqrt((1.0 + math.log1p(T)) / (1.0 + T))


def derive_params(
    mode: str = "theoretical",
    *,
    noise_std: Optional[float] = None,
    lambda_x: Optional[float] = None,
    dim: Optional[int] = None,
    horizon: Optional[int] = None,
    n_clusters: Optional[int] = None,
    n_users: Optional[int] = None,
    overrides: Optional[dict] = None,
) -> PolicyParams:
    """Build :class:`PolicyParams`.

    ``theoretical`` evaluates ``alpha_theta = 4 R sqrt(d / lambda_x)``,
    ``alpha_p = 2`` and ``beta = R sqrt(d ln(1 + T/d) + 2 ln(4 m n_u))``.
    ``manual`` takes ``alpha_theta``, ``alpha_p`` and ``beta`` from
    ``overrides`` verbatim.
    """
    inputs = {"noise_std": noise_std, "lambda_x": lambda_x, "dim": dim, "horizon": horizon,
              "n_clusters": n_clusters, "n_users": n_users}
    if mode == "manual":
        overrides = overrides or {}
        missing = [k for k in ("alpha_theta", "alpha_p", "beta") if k not in overrides]
        if missing:
            raise ValueError(f"manual mode needs overrides for {missing}")
        return PolicyParams(float(overrides["alpha_theta"]), float(overrides["alpha_p"]),
                            float(overrides["beta"]), inputs)
    if mode != "theoretical":
        raise ValueError(f"unknown parameter mode {mode!r}; expected one of {PARAM_MODES}")
    for name in ("noise_std", "lambda_x", "horizon", "dim", "n_clusters", "n_users"):
        value = inputs[name]
        if value is None or not value > 0:
            raise ValueError(f"{name} must be positive in theoretical mode, got {value!r}")
    R, d, T = float(noise_std), int(dim), int(horizon)
    alpha_theta = 4.0 * R * math.sqrt(d / lambda_x)
    beta = R * math.sqrt(d * math.log(1.0 + T / d) + 2.0 * math.log(4.0 * n_clusters * n_users))
    return PolicyParams(alpha_theta, 2.0, beta, inputs)
