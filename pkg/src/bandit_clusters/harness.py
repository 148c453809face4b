"""Experiment orchestration: policies x environment x seeds over a horizon."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .environment import (
    ConfigError,
    Environment,
    EnvironmentSpec,
    RoundStream,
    build_environment,
    ingest_weight_vectors,
    LAMBDA_SAMPLES,
)
from .linalg import new_state
from .policies import ALGORITHMS, make_params, make_policy
from .policies.club import GRAPH_INITS
from .policies.params import PARAM_MODES

log = logging.getLogger(__name__)

GENERATOR = "PCG64"
SEEDING = "numpy SeedSequence(entropy=base_seed, spawn_key=(repetition,))"
THREADS_ENV = "BANDIT_CLUSTERS_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    env_spec: EnvironmentSpec
    algorithms: tuple = ("sclub", "club", "linucb_one", "linucb_ind")
    horizon: int = 2 ** 14
    repetitions: int = 1
    base_seed: int = 0
    param_mode: str = "theoretical"
    overrides: dict = field(default_factory=dict)
    record_every: Optional[int] = None
    cluster_count: bool = True
    rand_index: bool = True
    club_graph: str = "complete"
    lambda_samples: int = LAMBDA_SAMPLES
    weights_file: Optional[str] = None

    def validate(self) -> None:
        if self.weights_file is None:
            self.env_spec.validate()
        if not self.algorithms:
            raise ConfigError("algorithms", "need at least one algorithm")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError("algorithms", f"unknown algorithm {a!r}; expected {ALGORITHMS}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms", "duplicate entries")
        if not isinstance(self.horizon, int) or self.horizon < 2:
            raise ConfigError("horizon", f"must be an integer >= 2, got {self.horizon!r}")
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ConfigError("repetitions", f"must be an integer >= 1, got {self.repetitions!r}")
        if self.param_mode not in PARAM_MODES:
            raise ConfigError("params.mode", f"must be one of {PARAM_MODES}")
        if self.param_mode == "manual":
            for k in ("alpha_theta", "alpha_p", "beta"):
                if k not in self.overrides:
                    raise ConfigError(f"params.overrides.{k}", "required in manual mode")
        if self.record_every is not None and (not isinstance(self.record_every, int)
                                              or self.record_every < 1):
            raise ConfigError("record_every", "must be a positive integer")
        if self.club_graph not in GRAPH_INITS:
            raise ConfigError("club_graph", f"must be one of {GRAPH_INITS}")
        if self.lambda_samples < 1000:
            raise ConfigError("lambda_samples", "must be >= 1000")

    @property
    def stride(self) -> int:
        return self.record_every or max(1, self.horizon // 1024)


@dataclass
class RegretTrace:
    algorithm: str
    seed: int
    rounds: np.ndarray
    cumulative_regret: np.ndarray
    cluster_count: Optional[np.ndarray] = None
    rand_index: Optional[np.ndarray] = None

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret[-1])


@dataclass
class AggregateResult:
    algorithm: str
    rounds: np.ndarray
    mean_trace: np.ndarray
    stderr_trace: np.ndarray
    mean_final_regret: float
    std_error: float
    repetitions: int


def derive_seed(base_seed: int, repetition: int) -> int:
    """64-bit seed for one repetition, mixed by :class:`numpy.random.SeedSequence`."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(repetition,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def environment_for(config: ExperimentConfig, repetition: int) -> Environment:
    seed = derive_seed(config.base_seed, repetition)
    if config.weights_file is not None:
        s = config.env_spec
        return ingest_weight_vectors(
            config.weights_file, items_per_round=s.items_per_round, noise_std=s.noise_std,
            frequency_mode=s.frequency_mode, frequency_seed_weights=s.frequency_seed_weights,
            rng_seed=seed, lambda_samples=config.lambda_samples)
    return build_environment(replace(config.env_spec, rng_seed=seed), config.lambda_samples)


def rand_index(pred, truth) -> float:
    """Fraction of element pairs on which two labelings agree (together/apart)."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"labelings cover different elements: {pred.shape} vs {truth.shape}")
    n = pred.size
    if n < 2:
        return 1.0
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)

    def pairs(v):
        v = v.astype(np.int64)
        return int((v * (v - 1) // 2).sum())

    total = n * (n - 1) // 2
    both = pairs(table)
    agree = total + 2 * both - pairs(table.sum(axis=1)) - pairs(table.sum(axis=0))
    return agree / total


def simulate(env: Environment, policy, horizon: int, stream_seed: int, *,
             record_every: int = 1, algorithm: str = "", seed: int = 0,
             cluster_count: bool = True, rand_index_metric: bool = True,
             audit_every: int = 0) -> RegretTrace:
    """Run ``policy`` for ``horizon`` rounds and record expected regret.

    Regret is measured on means (``max theta^T x - theta^T x_chosen``) so a
    policy that always picks the best item accrues exactly zero.
    """
    thetas = env.thetas
    R = env.spec.noise_std
    track_ri = rand_index_metric and env.has_ground_truth
    n_rec = horizon // record_every + (horizon % record_every != 0)
    rounds = np.empty(n_rec, dtype=np.int64)
    cum = np.empty(n_rec)
    counts = np.empty(n_rec, dtype=np.int64) if cluster_count else None
    ri = np.empty(n_rec) if track_ri else None
    total = 0.0
    k = 0
    stream = iter(RoundStream(env, stream_seed))
    for t in range(1, horizon + 1):
        user, items, eps = next(stream)
        means = items @ thetas[user]
        chosen = policy.step(user, items, lambda j: means[j] + R * eps)
        inst = float(means.max() - means[chosen])
        if inst < -1e-12:
            raise RuntimeError(f"negative regret {inst} at round {t}")
        total += inst
        if audit_every and t % audit_every == 0:
            policy.audit()
        if t % record_every == 0 or t == horizon:
            rounds[k] = t
            cum[k] = total
            if counts is not None:
                counts[k] = policy.n_clusters()
            if ri is not None:
                ri[k] = rand_index(policy.labels(), env.true_cluster)
            k += 1
    return RegretTrace(algorithm, seed, rounds[:k], cum[:k],
                       counts[:k] if counts is not None else None,
                       ri[:k] if ri is not None else None)


def build_policy(config: ExperimentConfig, algorithm: str, env: Environment, seed: int):
    params = make_params(algorithm, env, config.horizon, config.param_mode, config.overrides)
    graph_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    return make_policy(algorithm, env, params, graph=config.club_graph, rng=graph_rng), params


def run_single(config: ExperimentConfig, algorithm: str, repetition: int,
               env: Optional[Environment] = None, audit_every: int = 0) -> RegretTrace:
    """One (algorithm, repetition) run; the round stream depends only on the
    repetition, never on the algorithm."""
    seed = derive_seed(config.base_seed, repetition)
    if env is None:
        env = environment_for(config, repetition)
    policy, _ = build_policy(config, algorithm, env, seed)
    start = time.perf_counter()
    trace = simulate(env, policy, config.horizon, stream_seed=seed, record_every=config.stride,
                     algorithm=algorithm, seed=seed, cluster_count=config.cluster_count,
                     rand_index_metric=config.rand_index, audit_every=audit_every)
    log.info("%s rep=%d seed=%d T=%d regret=%.3f (%.1fs)", algorithm, repetition, seed,
             config.horizon, trace.final_regret, time.perf_counter() - start)
    return trace


def _run_task(args):
    config, algorithm, repetition = args
    return run_single(config, algorithm, repetition)


def worker_count(default: Optional[int] = None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"must be an integer, got {env!r}") from None
    return default or 1


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> dict:
    """All algorithms x repetitions; traces are returned in repetition order."""
    config.validate()
    workers = worker_count(workers)
    tasks = [(config, a, r) for r in range(config.repetitions) for a in config.algorithms]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    out = {a: [] for a in config.algorithms}
    for (_, a, _), trace in zip(tasks, results):
        out[a].append(trace)
    return out


def aggregate(traces) -> AggregateResult:
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    grid = traces[0].rounds
    for tr in traces[1:]:
        if tr.rounds.shape != grid.shape or not np.array_equal(tr.rounds, grid):
            raise ValueError("traces are recorded on different round grids")
    stack = np.vstack([tr.cumulative_regret for tr in traces])
    n = len(traces)
    if n > 1:
        se = stack.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        se = np.zeros(stack.shape[1])
    mean = stack.mean(axis=0)
    return AggregateResult(traces[0].algorithm, grid.copy(), mean, se,
                           float(mean[-1]), float(se[-1]), n)


@dataclass
class SelfNormReport:
    trials: int
    violations: list
    group_means: dict      # dim -> (mean of sum ||x||, closed-form bound)

    @property
    def ok(self) -> bool:
        return not self.violations and all(m <= b for m, b in self.group_means.values())


def selfnorm_stream(rng, dim: int, steps: int, max_batch: int, norm_bound: float = 1.0,
                    kind: str = "random"):
    """Yield batches of vectors with ``||x|| <= norm_bound`` and ``1 <= K_t <= max_batch``."""
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    for _ in range(steps):
        k = int(rng.integers(1, max_batch + 1))
        if kind == "zero":
            yield np.zeros((k, dim))
        elif kind == "repeated":
            yield np.tile(direction * norm_bound, (k, 1))
        else:
            v = rng.standard_normal((k, dim))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            yield v * (norm_bound * rng.random((k, 1)))


def selfnorm_check(batches, dim: int, lam: float) -> tuple[float, float, float]:
    """Return ``(sum ||x||^2, sum ||x||, 2 log det(M_n)/det(M))`` for ``M = lam I``.

    With ``z = x / sqrt(lam)``, ``||x||_{M^-1} = ||z||_{S^-1}`` for the unit
    regularized state ``S``, and ``det M_n / det M = det S_n``.
    """
    state = new_state(dim)
    sq = lin = 0.0
    scale = 1.0 / math.sqrt(lam)
    for batch in batches:
        z = batch * scale
        w = state.widths(z) if len(z) else np.zeros(0)
        if (w * w).sum() > 1 + 1e-12:
            raise ValueError("batch violates the normalized-width precondition")
        sq += float((w * w).sum())
        lin += float(w.sum())
        for row in z:
            state.absorb(row, 0.0)
    state.refresh()
    return sq, lin, 2.0 * state.log_det


def selfnorm_oracle_suite(rng, trials: int, dims=(1, 2, 5, 20), max_batch: int = 4,
                          steps: int = 100, norm_bound: float = 1.0, kind: str = "random",
                          tol: float = 1e-8) -> SelfNormReport:
    """Check the log-det self-normalized inequality on random streams.

    The per-trial inequality must hold exactly (to ``tol``); the closed-form
    bound on ``sum ||x||`` is checked on the per-dimension mean over trials.
    """
    lam = max_batch * norm_bound ** 2
    expected_k = (max_batch + 1) / 2
    violations = []
    sums: dict = {}
    for trial in range(trials):
        d = int(dims[trial % len(dims)])
        sq, lin, rhs = selfnorm_check(
            selfnorm_stream(rng, d, steps, max_batch, norm_bound, kind), d, lam)
        if sq > rhs + tol:
            violations.append((trial, d, sq, rhs))
        sums.setdefault(d, []).append(lin)
    means = {}
    for d, v in sums.items():
        bound = math.sqrt(2 * d * steps * expected_k
                          * math.log(1 + steps * max_batch * norm_bound ** 2 / (lam * d)))
        means[d] = (float(np.mean(v)), bound)
    return SelfNormReport(trials, violations, means)
