"""Synthetic ground truth and round sampling for clustered linear bandits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FREQUENCY_MODES = ("uniform", "per_cluster", "per_user")
LAMBDA_SAMPLES = 100_000
_MAX_RESAMPLE = 100
_COLLISION_TOL = 1e-6


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class WeightFileError(ValueError):
    pass


@dataclass(frozen=True)
class EnvironmentSpec:
    n_users: int
    n_clusters: int
    dim: int
    items_per_round: int
    noise_std: float = 0.1
    frequency_mode: str = "uniform"
    frequency_seed_weights: Optional[tuple] = None
    rng_seed: int = 0

    def validate(self, prefix: str = "env") -> None:
        for name in ("n_users", "n_clusters", "dim", "items_per_round"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{prefix}.{name}", f"must be a positive integer, got {value!r}")
        if self.n_clusters > self.n_users:
            raise ConfigError(f"{prefix}.n_clusters",
                              f"must be <= n_users ({self.n_clusters} > {self.n_users})")
        if self.dim < 2:
            raise ConfigError(f"{prefix}.dim", "must be >= 2 (one coordinate is the constant lift)")
        if self.dim == 2 and self.n_clusters > 2:
            raise ConfigError(f"{prefix}.n_clusters",
                              "dim = 2 admits only two distinct lifted weight vectors")
        if not self.noise_std >= 0:
            raise ConfigError(f"{prefix}.noise_std", f"must be >= 0, got {self.noise_std!r}")
        if self.frequency_mode not in FREQUENCY_MODES:
            raise ConfigError(f"{prefix}.frequency_mode",
                              f"must be one of {FREQUENCY_MODES}, got {self.frequency_mode!r}")
        w = self.frequency_seed_weights
        if w is not None:
            expected = {"per_cluster": self.n_clusters, "per_user": self.n_users}.get(self.frequency_mode)
            if expected is None:
                raise ConfigError(f"{prefix}.frequency_seed_weights",
                                  "only meaningful for per_cluster or per_user modes")
            if len(w) != expected:
                raise ConfigError(f"{prefix}.frequency_seed_weights",
                                  f"expected {expected} weights, got {len(w)}")
            if any(not (v > 0) for v in w):
                raise ConfigError(f"{prefix}.frequency_seed_weights", "weights must be positive")


@dataclass(frozen=True, eq=False)
class Environment:
    spec: EnvironmentSpec
    thetas: np.ndarray            # (n_users, dim), unit rows
    true_cluster: np.ndarray      # (n_users,) int labels
    frequencies: np.ndarray       # (n_users,) simplex
    gap_theta: float
    gap_freq: float
    lambda_x_est: float
    has_ground_truth: bool = True
    cdf: np.ndarray = field(repr=False, default=None)

    @property
    def n_users(self) -> int:
        return self.spec.n_users

    @property
    def dim(self) -> int:
        return self.spec.dim


def lift_to_sphere(raw) -> np.ndarray:
    """Map ``x -> (x / (sqrt(2) ||x||), 1 / sqrt(2))`` along the last axis.

    Two lifted vectors always have an inner product in ``[0, 1]``.
    """
    raw = np.asarray(raw, dtype=float)
    norms = np.linalg.norm(raw, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot lift the zero vector")
    head = raw / (np.sqrt(2.0) * norms)
    tail = np.full(raw.shape[:-1] + (1,), 1.0 / np.sqrt(2.0))
    return np.concatenate([head, tail], axis=-1)


def _pairwise_min_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return float("inf")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return float(dist[np.triu_indices(len(points), k=1)].min())


def _min_gap(values: np.ndarray, tol: float = 1e-15) -> float:
    uniq = np.unique(values)
    gaps = np.diff(uniq)
    gaps = gaps[gaps > tol]
    return float(gaps.min()) if gaps.size else float("inf")


def assign_blocks(n_users: int, n_clusters: int) -> np.ndarray:
    """Contiguous equal blocks; the remainder is dealt round-robin."""
    block = n_users // n_clusters
    labels = np.repeat(np.arange(n_clusters), block)
    extra = np.arange(n_users - block * n_clusters) % n_clusters
    return np.concatenate([labels, extra]).astype(np.int64)


def _frequencies(spec: EnvironmentSpec, true_cluster: np.ndarray, rng) -> np.ndarray:
    n = spec.n_users
    if spec.frequency_mode == "uniform":
        return np.full(n, 1.0 / n)
    if spec.frequency_mode == "per_cluster":
        k = int(true_cluster.max()) + 1
        if spec.frequency_seed_weights is not None:
            w = np.asarray(spec.frequency_seed_weights, dtype=float)
        else:
            w = rng.exponential(1.0, size=k)
        mass = w / w.sum()
        sizes = np.bincount(true_cluster, minlength=k)
        p = mass[true_cluster] / sizes[true_cluster]
    else:
        if spec.frequency_seed_weights is not None:
            w = np.asarray(spec.frequency_seed_weights, dtype=float)
        else:
            w = rng.exponential(1.0, size=n)
        p = w
    return p / p.sum()


def _finish(spec, thetas, true_cluster, frequencies, lambda_samples, lambda_rng,
            has_ground_truth=True) -> Environment:
    distinct = np.unique(thetas, axis=0)
    cdf = np.cumsum(frequencies)
    cdf[-1] = 1.0
    env = Environment(
        spec=spec,
        thetas=thetas,
        true_cluster=true_cluster,
        frequencies=frequencies,
        gap_theta=_pairwise_min_distance(distinct),
        gap_freq=_min_gap(frequencies),
        lambda_x_est=0.0,
        has_ground_truth=has_ground_truth,
        cdf=cdf,
    )
    lam = estimate_lambda_x(env, lambda_samples, lambda_rng)
    object.__setattr__(env, "lambda_x_est", lam)
    for arr in (thetas, true_cluster, frequencies, cdf):
        arr.setflags(write=False)
    return env


def build_environment(spec: EnvironmentSpec, lambda_samples: int = LAMBDA_SAMPLES) -> Environment:
    spec.validate()
    ss = np.random.SeedSequence(spec.rng_seed)
    theta_ss, freq_ss, lam_ss = ss.spawn(3)
    rng = np.random.default_rng(theta_ss)
    for _ in range(_MAX_RESAMPLE):
        centers = lift_to_sphere(rng.standard_normal((spec.n_clusters, spec.dim - 1)))
        if _pairwise_min_distance(centers) > _COLLISION_TOL:
            break
    else:
        raise RuntimeError(f"cluster vectors collided after {_MAX_RESAMPLE} draws")
    true_cluster = assign_blocks(spec.n_users, spec.n_clusters)
    thetas = centers[true_cluster]
    freqs = _frequencies(spec, true_cluster, np.random.default_rng(freq_ss))
    return _finish(spec, thetas, true_cluster, freqs, lambda_samples, np.random.default_rng(lam_ss))


def estimate_lambda_x(env: Environment, samples: int = LAMBDA_SAMPLES, rng=None) -> float:
    """Smallest eigenvalue of the empirical item second-moment matrix."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    if rng is None:
        rng = np.random.default_rng(env.spec.rng_seed)
    x = lift_to_sphere(rng.standard_normal((samples, env.dim - 1)))
    second = x.T @ x / samples
    return float(np.linalg.eigvalsh(second)[0])


def sample_users(env: Environment, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from uniforms in [0, 1) to user indices."""
    idx = np.searchsorted(env.cdf, uniforms, side="right")
    return np.minimum(idx, env.n_users - 1)


def draw_round(env: Environment, rng) -> tuple[int, np.ndarray]:
    user = int(sample_users(env, rng.random()))
    items = lift_to_sphere(rng.standard_normal((env.spec.items_per_round, env.dim - 1)))
    return user, items


def reward(env: Environment, user: int, item: np.ndarray, rng) -> float:
    mean = float(env.thetas[user] @ item)
    if env.spec.noise_std == 0:
        return mean
    return mean + env.spec.noise_std * float(rng.standard_normal())


def best_reward(env: Environment, user: int, items: np.ndarray) -> tuple[float, int]:
    means = items @ env.thetas[user]
    k = int(np.argmax(means))
    return float(means[k]), k


class RoundStream:
    """Chunked, reproducible sequence of ``(user, items, noise)`` rounds.

    Users, items and noise come from three independent PCG64 streams spawned
    from ``seed``, so chunking never changes the sequence and every policy
    fed from the same seed sees the same rounds and the same noise draws.
    """

    def __init__(self, env: Environment, seed: int, chunk: int = 4096):
        self.env = env
        user_ss, item_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
        self._users = np.random.default_rng(user_ss)
        self._items = np.random.default_rng(item_ss)
        self._noise = np.random.default_rng(noise_ss)
        self.chunk = chunk

    def __iter__(self):
        env = self.env
        L, d = env.spec.items_per_round, env.dim
        while True:
            users = sample_users(env, self._users.random(self.chunk))
            items = lift_to_sphere(self._items.standard_normal((self.chunk, L, d - 1)))
            noise = self._noise.standard_normal(self.chunk)
            for k in range(self.chunk):
                yield int(users[k]), items[k], float(noise[k])


def _read_weight_rows(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise WeightFileError(f"{path}:{lineno}: non-numeric entry in {row!r}") from None
            if not all(np.isfinite(values)):
                raise WeightFileError(f"{path}:{lineno}: non-finite entry")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise WeightFileError(
                    f"{path}:{lineno}: expected {width} columns, got {len(values)}")
            if not any(values):
                raise WeightFileError(f"{path}:{lineno}: zero row cannot be normalized")
            rows.append(values)
    if not rows:
        raise WeightFileError(f"{path}: no weight vectors found")
    return np.asarray(rows, dtype=float)


def ingest_weight_vectors(
    path,
    items_per_round: int,
    noise_std: float = 0.1,
    frequency_mode: str = "uniform",
    frequency_seed_weights: Optional[Sequence[float]] = None,
    rng_seed: int = 0,
    lambda_samples: int = LAMBDA_SAMPLES,
) -> Environment:
    """Build an environment whose users are the rows of a CSV file.

    Every user is its own ground-truth cluster, so clustering metrics are
    disabled for the result.
    """
    if frequency_mode == "per_cluster":
        raise ConfigError("env.frequency_mode", "per_cluster needs a ground-truth clustering")
    raw = _read_weight_rows(Path(path))
    n, width = raw.shape
    spec = EnvironmentSpec(
        n_users=n, n_clusters=n, dim=width + 1, items_per_round=items_per_round,
        noise_std=noise_std, frequency_mode=frequency_mode,
        frequency_seed_weights=None if frequency_seed_weights is None else tuple(frequency_seed_weights),
        rng_seed=rng_seed,
    )
    spec.validate()
    _, freq_ss, lam_ss = np.random.SeedSequence(rng_seed).spawn(3)
    true_cluster = np.arange(n, dtype=np.int64)
    freqs = _frequencies(spec, true_cluster, np.random.default_rng(freq_ss))
    return _finish(spec, lift_to_sphere(raw), true_cluster, freqs, lambda_samples,
                   np.random.default_rng(lam_ss), has_ground_truth=False)
