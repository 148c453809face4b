"""JSON experiment configs <-> :class:`ExperimentConfig`.

Example::

    {
      "env": {"n_users": 64, "n_clusters": 8, "dim": 10, "items_per_round": 10,
              "noise_std": 0.1, "frequency_mode": "uniform"},
      "algorithms": ["sclub", "club", "linucb_one", "linucb_ind"],
      "horizon": 131072,
      "repetitions": 5,
      "base_seed": 0,
      "params": {"mode": "theoretical", "overrides": {}}
    }
"""

from __future__ import annotations

import json
from pathlib import Path

from .environment import LAMBDA_SAMPLES, ConfigError, EnvironmentSpec
from .harness import ExperimentConfig

_ENV_KEYS = {"n_users", "n_clusters", "dim", "items_per_round", "noise_std",
             "frequency_mode", "frequency_seed_weights", "rng_seed", "weights_file"}
_TOP_KEYS = {"env", "algorithms", "horizon", "repetitions", "base_seed", "params",
             "record_every", "metrics", "club_graph", "lambda_samples"}


def _expect(obj, kind, path):
    if not isinstance(obj, kind) or (kind is int and isinstance(obj, bool)):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(path, f"expected {name}, got {type(obj).__name__}")
    return obj


def _unknown(d, allowed, path):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def config_from_dict(data: dict) -> ExperimentConfig:
    _expect(data, dict, "<root>")
    _unknown(data, _TOP_KEYS, "")
    if "env" not in data:
        raise ConfigError("env", "missing required section")
    env = _expect(data["env"], dict, "env")
    _unknown(env, _ENV_KEYS, "env")
    weights_file = env.get("weights_file")
    if weights_file is None:
        for k in ("n_users", "n_clusters", "dim", "items_per_round"):
            if k not in env:
                raise ConfigError(f"env.{k}", "missing required key")
    elif "items_per_round" not in env:
        raise ConfigError("env.items_per_round", "missing required key")
    weights = env.get("frequency_seed_weights")
    if weights is not None:
        _expect(weights, list, "env.frequency_seed_weights")
        weights = tuple(float(_expect(w, (int, float), f"env.frequency_seed_weights[{i}]"))
                        for i, w in enumerate(weights))
    for k in ("n_users", "n_clusters", "dim", "items_per_round", "rng_seed"):
        if k in env:
            _expect(env[k], int, f"env.{k}")
    if "noise_std" in env:
        _expect(env["noise_std"], (int, float), "env.noise_std")
    spec = EnvironmentSpec(
        n_users=env.get("n_users", 1), n_clusters=env.get("n_clusters", 1),
        dim=env.get("dim", 2), items_per_round=env["items_per_round"],
        noise_std=float(env.get("noise_std", 0.1)),
        frequency_mode=env.get("frequency_mode", "uniform"),
        frequency_seed_weights=weights, rng_seed=env.get("rng_seed", 0),
    )
    params = _expect(data.get("params", {}), dict, "params")
    _unknown(params, {"mode", "overrides"}, "params")
    overrides = _expect(params.get("overrides", {}), dict, "params.overrides")
    _unknown(overrides, {"alpha_theta", "alpha_p", "beta"}, "params.overrides")
    for k, v in overrides.items():
        _expect(v, (int, float), f"params.overrides.{k}")
    metrics = _expect(data.get("metrics", {}), dict, "metrics")
    _unknown(metrics, {"cluster_count", "rand_index"}, "metrics")
    algorithms = _expect(data.get("algorithms", ["sclub", "club", "linucb_one", "linucb_ind"]),
                         list, "algorithms")
    for k in ("horizon", "repetitions", "base_seed", "lambda_samples"):
        if k in data:
            _expect(data[k], int, k)
    if data.get("record_every") is not None:
        _expect(data["record_every"], int, "record_every")
    cfg = ExperimentConfig(
        env_spec=spec,
        algorithms=tuple(algorithms),
        horizon=data.get("horizon", 2 ** 14),
        repetitions=data.get("repetitions", 1),
        base_seed=data.get("base_seed", 0),
        param_mode=params.get("mode", "theoretical"),
        overrides={k: float(v) for k, v in overrides.items()},
        record_every=data.get("record_every"),
        cluster_count=bool(metrics.get("cluster_count", True)),
        rand_index=bool(metrics.get("rand_index", True)),
        club_graph=data.get("club_graph", "complete"),
        lambda_samples=data.get("lambda_samples", LAMBDA_SAMPLES),
        weights_file=weights_file,
    )
    cfg.validate()
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    s = cfg.env_spec
    env = {
        "n_users": s.n_users, "n_clusters": s.n_clusters, "dim": s.dim,
        "items_per_round": s.items_per_round, "noise_std": s.noise_std,
        "frequency_mode": s.frequency_mode,
        "frequency_seed_weights": None if s.frequency_seed_weights is None
        else list(s.frequency_seed_weights),
        "rng_seed": s.rng_seed,
    }
    if cfg.weights_file is not None:
        env["weights_file"] = cfg.weights_file
    return {
        "env": env,
        "algorithms": list(cfg.algorithms),
        "horizon": cfg.horizon,
        "repetitions": cfg.repetitions,
        "base_seed": cfg.base_seed,
        "params": {"mode": cfg.param_mode, "overrides": dict(cfg.overrides)},
        "record_every": cfg.record_every,
        "metrics": {"cluster_count": cfg.cluster_count, "rand_index": cfg.rand_index},
        "club_graph": cfg.club_graph,
        "lambda_samples": cfg.lambda_samples,
    }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)
