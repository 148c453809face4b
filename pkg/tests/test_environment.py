import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandit_clusters.environment import (
    ConfigError,
    EnvironmentSpec,
    RoundStream,
    WeightFileError,
    assign_blocks,
    best_reward,
    build_environment,
    draw_round,
    estimate_lambda_x,
    ingest_weight_vectors,
    lift_to_sphere,
    reward,
    sample_users,
)

SMALL = dict(lambda_samples=2000)


def spec(**kw):
    base = dict(n_users=20, n_clusters=4, dim=5, items_per_round=6, noise_std=0.1, rng_seed=11)
    base.update(kw)
    return EnvironmentSpec(**base)


class TestLift:
    def test_three_four(self):
        np.testing.assert_allclose(
            lift_to_sphere([3.0, 4.0]),
            [3 / (5 * math.sqrt(2)), 4 / (5 * math.sqrt(2)), 1 / math.sqrt(2)])

    def test_scalar(self):
        np.testing.assert_allclose(lift_to_sphere([1.0]), [1 / math.sqrt(2)] * 2)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            lift_to_sphere([0.0, 0.0])

    def test_inner_products_in_unit_interval(self):
        rng = np.random.default_rng(0)
        a = lift_to_sphere(rng.standard_normal((100_000, 7)))
        b = lift_to_sphere(rng.standard_normal((100_000, 7)))
        ip = (a * b).sum(axis=1)
        assert ip.min() >= -1e-12 and ip.max() <= 1 + 1e-12
        np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12).filter(
        lambda v: np.linalg.norm(v) > 1e-6))
    def test_unit_norm_property(self, raw):
        assert np.linalg.norm(lift_to_sphere(raw)) == pytest.approx(1.0, abs=1e-9)


class TestSpecValidation:
    def test_m_greater_than_n(self):
        with pytest.raises(ConfigError) as e:
            spec(n_users=3, n_clusters=4).validate()
        assert e.value.field == "env.n_clusters"

    def test_dim_one(self):
        with pytest.raises(ConfigError, match="env.dim"):
            spec(dim=1).validate()

    def test_dim_two_cluster_limit(self):
        with pytest.raises(ConfigError, match="env.n_clusters"):
            spec(dim=2, n_clusters=3).validate()

    def test_bad_mode(self):
        with pytest.raises(ConfigError, match="frequency_mode"):
            spec(frequency_mode="zipf").validate()

    def test_weight_length(self):
        with pytest.raises(ConfigError, match="frequency_seed_weights"):
            spec(frequency_mode="per_cluster", frequency_seed_weights=(1.0, 2.0)).validate()


class TestBuild:
    def test_block_assignment(self):
        np.testing.assert_array_equal(assign_blocks(7, 3), [0, 0, 1, 1, 2, 2, 0])
        np.testing.assert_array_equal(assign_blocks(10, 10), np.arange(10))

    def test_singleton_clusters(self):
        env = build_environment(spec(n_users=10, n_clusters=10), **SMALL)
        assert len(np.unique(env.thetas, axis=0)) == 10
        assert env.gap_theta > 0

    def test_uniform_thousand_users(self):
        env = build_environment(spec(n_users=1000, n_clusters=10, dim=20, items_per_round=20),
                                **SMALL)
        assert np.all(env.frequencies == 0.001)
        assert env.gap_freq == math.inf

    def test_invariants(self):
        env = build_environment(spec(), **SMALL)
        np.testing.assert_allclose(np.linalg.norm(env.thetas, axis=1), 1.0, atol=1e-9)
        assert env.frequencies.sum() == pytest.approx(1.0, abs=1e-12)
        for c in range(4):
            rows = env.thetas[env.true_cluster == c]
            assert np.all(rows == rows[0])
        centers = np.array([env.thetas[env.true_cluster == c][0] for c in range(4)])
        dist = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
        assert env.gap_theta == pytest.approx(dist[np.triu_indices(4, 1)].min())

    def test_deterministic(self):
        a, b = build_environment(spec(), **SMALL), build_environment(spec(), **SMALL)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.frequencies, b.frequencies)
        assert a.lambda_x_est == b.lambda_x_est

    def test_seed_changes_instance(self):
        a = build_environment(spec(), **SMALL)
        b = build_environment(spec(rng_seed=12), **SMALL)
        assert not np.array_equal(a.thetas, b.thetas)

    def test_per_cluster_shared(self):
        w = (8, 4, 2, 1)
        env = build_environment(spec(frequency_mode="per_cluster", frequency_seed_weights=w),
                                **SMALL)
        for c in range(4):
            f = env.frequencies[env.true_cluster == c]
            assert np.all(f == f[0])
            assert f.sum() == pytest.approx(w[c] / sum(w))
        assert env.gap_freq == pytest.approx((2 - 1) / 15 / 5)

    def test_per_cluster_seeded_draw(self):
        env = build_environment(spec(frequency_mode="per_cluster"), **SMALL)
        assert len(np.unique(env.frequencies)) == 4

    def test_per_user(self):
        env = build_environment(spec(frequency_mode="per_user"), **SMALL)
        assert len(np.unique(env.frequencies)) == 20
        assert env.frequencies.sum() == pytest.approx(1.0, abs=1e-12)


class TestLambda:
    def test_d2(self):
        env = build_environment(spec(dim=2, n_clusters=2), **SMALL)
        assert estimate_lambda_x(env, 20_000, np.random.default_rng(0)) == pytest.approx(0.5, abs=0.05)

    def test_d21(self):
        env = build_environment(spec(dim=21), **SMALL)
        lam = estimate_lambda_x(env, 100_000, np.random.default_rng(0))
        assert lam == pytest.approx(1 / 40, rel=0.2)
        assert lam > 0

    def test_too_few_samples(self):
        env = build_environment(spec(), **SMALL)
        with pytest.raises(ValueError):
            estimate_lambda_x(env, 10)


class TestRounds:
    def test_uniform_concentration(self):
        env = build_environment(spec(n_users=1000, n_clusters=10), **SMALL)
        n = 1_000_000
        users = sample_users(env, np.random.default_rng(3).random(n))
        freq = np.bincount(users, minlength=1000) / n
        p = 1 / 1000
        within = np.abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)
        assert within.mean() >= 0.99

    def test_twenty_items_unit_norm(self):
        env = build_environment(spec(n_users=50, n_clusters=5, dim=20, items_per_round=20), **SMALL)
        user, items = draw_round(env, np.random.default_rng(0))
        assert items.shape == (20, 20)
        np.testing.assert_allclose(np.linalg.norm(items, axis=1), 1.0, atol=1e-9)
        assert 0 <= user < 50

    def test_replay(self):
        env = build_environment(spec(), **SMALL)
        a = draw_round(env, np.random.default_rng(9))
        b = draw_round(env, np.random.default_rng(9))
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_stream_chunking_invisible(self):
        env = build_environment(spec(), **SMALL)
        a = [r for _, r in zip(range(50), RoundStream(env, 5, chunk=7))]
        b = [r for _, r in zip(range(50), RoundStream(env, 5, chunk=4096))]
        for (u1, x1, e1), (u2, x2, e2) in zip(a, b):
            assert u1 == u2 and e1 == e2 and np.array_equal(x1, x2)

    def test_hoeffding_frequency(self):
        # three-user instance; see also the acceptance suite
        env = build_environment(spec(n_users=3, n_clusters=3, frequency_mode="per_user",
                                     frequency_seed_weights=(0.5, 0.3, 0.2)), **SMALL)
        tau, trials = 10_000, 50
        rng = np.random.default_rng(1)
        bound = math.sqrt(math.log(2 / 0.01) / (2 * tau))
        hits = 0
        for _ in range(trials):
            p_hat = np.bincount(sample_users(env, rng.random(tau)), minlength=3) / tau
            hits += int((np.abs(p_hat - env.frequencies) <= bound).sum())
        assert hits / (3 * trials) >= 0.98


class TestReward:
    def test_noiseless(self):
        env = build_environment(spec(noise_std=0.0), **SMALL)
        x = lift_to_sphere([1.0, 2.0, 3.0, 4.0])
        assert reward(env, 2, x, np.random.default_rng(0)) == float(env.thetas[2] @ x)

    def test_self_item_mean_one(self):
        env = build_environment(spec(noise_std=0.0), **SMALL)
        assert reward(env, 3, env.thetas[3], None) == pytest.approx(1.0)

    def test_clt(self):
        env = build_environment(spec(noise_std=0.3), **SMALL)
        x = lift_to_sphere([1.0, -1.0, 0.5, 2.0])
        rng = np.random.default_rng(4)
        draws = np.array([reward(env, 0, x, rng) for _ in range(100_000)])
        assert abs(draws.mean() - env.thetas[0] @ x) <= 4 * 0.3 / math.sqrt(100_000)


class TestBestReward:
    def test_single(self):
        env = build_environment(spec(), **SMALL)
        x = lift_to_sphere([[1.0, 0.0, 0.0, 0.0]])
        v, k = best_reward(env, 0, x)
        assert k == 0 and v == pytest.approx(env.thetas[0] @ x[0])

    def test_contains_theta(self):
        env = build_environment(spec(), **SMALL)
        rng = np.random.default_rng(0)
        items = lift_to_sphere(rng.standard_normal((6, 4)))
        items[4] = env.thetas[1]
        v, k = best_reward(env, 1, items)
        assert k == 4 and v == pytest.approx(1.0)

    def test_scan_and_permutation(self):
        env = build_environment(spec(), **SMALL)
        rng = np.random.default_rng(2)
        items = lift_to_sphere(rng.standard_normal((20, 4)))
        v, k = best_reward(env, 5, items)
        scan = max(range(20), key=lambda j: (env.thetas[5] @ items[j], -j))
        assert k == scan
        for _ in range(5):
            perm = rng.permutation(20)
            v2, k2 = best_reward(env, 5, items[perm])
            assert v2 == v and perm[k2] == k

    def test_tie_lowest_index(self):
        env = build_environment(spec(), **SMALL)
        items = np.vstack([env.thetas[0] * 0.5, env.thetas[0], env.thetas[0]])
        assert best_reward(env, 0, items)[1] == 1


class TestIngest:
    def test_three_rows(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("1,2\n-3,0.5\n0,1\n")
        env = ingest_weight_vectors(p, items_per_round=4, **SMALL)
        assert env.thetas.shape == (3, 3)
        np.testing.assert_allclose(np.linalg.norm(env.thetas, axis=1), 1.0)
        assert not env.has_ground_truth
        np.testing.assert_array_equal(env.true_cluster, [0, 1, 2])

    def test_duplicates(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("1,2\n1,2\n")
        env = ingest_weight_vectors(p, items_per_round=2, **SMALL)
        assert np.array_equal(env.thetas[0], env.thetas[1])

    @pytest.mark.parametrize("text, match", [
        ("", "no weight vectors"),
        ("1,2\n1,x\n", ":2: non-numeric"),
        ("1,2\n1,2,3\n", ":2: expected 2 columns"),
        ("1,2\n0,0\n", ":2: zero row"),
    ])
    def test_errors(self, tmp_path, text, match):
        p = tmp_path / "w.csv"
        p.write_text(text)
        with pytest.raises(WeightFileError, match=match):
            ingest_weight_vectors(p, items_per_round=2, **SMALL)

    def test_per_cluster_refused(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("1,2\n")
        with pytest.raises(ConfigError):
            ingest_weight_vectors(p, items_per_round=2, frequency_mode="per_cluster", **SMALL)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 63), n=st.integers(1, 30), d=st.integers(2, 8),
       mode=st.sampled_from(["uniform", "per_cluster", "per_user"]), data=st.data())
def test_environment_properties(seed, n, d, mode, data):
    m = data.draw(st.integers(1, min(n, 2) if d == 2 else n))
    env = build_environment(EnvironmentSpec(n, m, d, 3, 0.1, mode, rng_seed=seed), **SMALL)
    assert env.frequencies.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(env.frequencies > 0)
    ip = env.thetas @ env.thetas.T
    assert ip.min() >= -1e-12 and ip.max() <= 1 + 1e-9
    if mode != "per_user":
        for c in range(m):
            f = env.frequencies[env.true_cluster == c]
            assert np.all(f == f[0])
