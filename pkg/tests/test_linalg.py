import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandit_clusters.linalg import (
    REFRESH_EVERY,
    BookkeepingError,
    absorb,
    combine,
    estimate,
    mahalanobis,
    new_state,
    pool,
    retire,
)


def rebuild(xs, ys, dim):
    """Reference: direct O(d^3) construction from raw observations."""
    S = np.eye(dim) + sum((np.outer(x, x) for x in xs), np.zeros((dim, dim)))
    b = sum((y * x for x, y in zip(xs, ys)), np.zeros(dim))
    return S, b


def unit_ball(rng, n, d):
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.random((n, 1))


def assert_state_close(s, S, b, count, tol=1e-8):
    np.testing.assert_allclose(s.gramian, S, atol=tol, rtol=0)
    np.testing.assert_allclose(s.moment, b, atol=tol, rtol=0)
    assert s.count == count
    np.testing.assert_allclose(s.inverse, np.linalg.inv(S), atol=tol, rtol=0)
    assert s.log_det == pytest.approx(np.linalg.slogdet(S)[1], abs=tol)


class TestNewState:
    @pytest.mark.parametrize("dim", [1, 3, 20])
    def test_identity(self, dim):
        s = new_state(dim)
        assert np.array_equal(s.gramian, np.eye(dim))
        assert np.array_equal(s.inverse, np.eye(dim))
        assert np.array_equal(s.moment, np.zeros(dim))
        assert s.count == 0 and s.log_det == 0
        assert np.array_equal(estimate(s), np.zeros(dim))

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            new_state(0)


class TestAbsorb:
    def test_axis_aligned(self):
        s = absorb(new_state(2), np.array([1.0, 0.0]), 2.0)
        np.testing.assert_array_equal(s.gramian, [[2, 0], [0, 1]])
        np.testing.assert_array_equal(s.moment, [2, 0])
        np.testing.assert_allclose(estimate(s), [1, 0])
        assert s.log_det == pytest.approx(math.log(2))

    def test_two_axes(self):
        xs = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        s = new_state(2)
        for x in xs:
            s.absorb(x, 1.0)
        S, b = rebuild(xs, [1.0, 1.0], 2)
        np.testing.assert_allclose(estimate(s), np.linalg.solve(S, b), atol=1e-15)
        np.testing.assert_allclose(estimate(s), [0.5, 0.5])

    def test_inverse_after_100_random(self):
        rng = np.random.default_rng(1)
        xs = unit_ball(rng, 100, 6)
        ys = rng.standard_normal(100)
        s = new_state(6)
        for x, y in zip(xs, ys):
            s.absorb(x, y)
        assert_state_close(s, *rebuild(xs, ys, 6), count=100)

    def test_refresh_happens(self):
        rng = np.random.default_rng(2)
        s = new_state(3)
        for x in unit_ball(rng, REFRESH_EVERY, 3):
            s.absorb(x, 0.0)
        assert s._since_refresh == 0

    def test_log_det_monotone(self):
        rng = np.random.default_rng(3)
        s = new_state(4)
        last = s.log_det
        for x in unit_ball(rng, 300, 4):
            s.absorb(x, 1.0)
            assert s.log_det >= last
            last = s.log_det


class TestEstimate:
    def test_single(self):
        s = absorb(new_state(2), np.array([1.0, 0.0]), 3.0)
        np.testing.assert_allclose(estimate(s), [1.5, 0.0])

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(4)
        theta = rng.standard_normal(5)
        theta /= np.linalg.norm(theta)
        xs = rng.standard_normal((500, 5))
        xs /= np.linalg.norm(xs, axis=1, keepdims=True)
        s = new_state(5)
        for x in xs:
            s.absorb(x, float(theta @ x))
        assert np.linalg.norm(estimate(s) - theta) <= 0.05


class TestMahalanobis:
    def test_fresh_is_norm(self):
        x = np.array([0.6, 0.8])
        assert mahalanobis(new_state(2), x) == pytest.approx(1.0)

    def test_zero(self):
        assert mahalanobis(new_state(3), np.zeros(3)) == 0.0

    def test_after_absorb(self):
        s = absorb(new_state(2), np.array([1.0, 0.0]), 0.0)
        assert mahalanobis(s, np.array([1.0, 0.0])) == pytest.approx(1 / math.sqrt(2))

    def test_widths_match(self):
        rng = np.random.default_rng(5)
        s = new_state(4)
        for x in unit_ball(rng, 20, 4):
            s.absorb(x, 0.0)
        items = unit_ball(rng, 7, 4)
        np.testing.assert_allclose(s.widths(items), [mahalanobis(s, x) for x in items])


class TestRetireCombine:
    def setup_method(self):
        rng = np.random.default_rng(6)
        self.d = 4
        self.X, self.Y = unit_ball(rng, 40, 4), unit_ball(rng, 25, 4)
        self.yx, self.yy = rng.standard_normal(40), rng.standard_normal(25)

    def _state(self, xs, ys):
        s = new_state(self.d)
        for x, y in zip(xs, ys):
            s.absorb(x, y)
        return s

    def test_retire_matches_rebuild(self):
        both = self._state(np.vstack([self.X, self.Y]), np.concatenate([self.yx, self.yy]))
        out = retire(both, self._state(self.Y, self.yy))
        assert_state_close(out, *rebuild(self.X, self.yx, self.d), count=40)

    def test_retire_empty(self):
        s = self._state(self.X, self.yx)
        out = retire(s, new_state(self.d))
        assert_state_close(out, s.gramian, s.moment, s.count)

    def test_retire_self(self):
        s = self._state(self.X, self.yx)
        out = retire(s, s)
        assert_state_close(out, np.eye(self.d), np.zeros(self.d), 0)

    def test_retire_negative_count(self):
        with pytest.raises(BookkeepingError):
            retire(new_state(self.d), self._state(self.X, self.yx))

    def test_retire_not_pd(self):
        big = new_state(2)
        big.gramian = np.diag([5.0, 1.0])
        big.count = 3
        small = new_state(2)
        small.gramian = np.diag([1.0, 3.0])
        with pytest.raises(BookkeepingError):
            retire(big, small)

    def test_combine_matches_rebuild(self):
        out = combine(self._state(self.X, self.yx), self._state(self.Y, self.yy))
        S, b = rebuild(np.vstack([self.X, self.Y]), np.concatenate([self.yx, self.yy]), self.d)
        assert_state_close(out, S, b, count=65)

    def test_combine_new(self):
        out = combine(new_state(3), new_state(3))
        assert_state_close(out, np.eye(3), np.zeros(3), 0)

    def test_combine_commutes(self):
        a, b = self._state(self.X, self.yx), self._state(self.Y, self.yy)
        ab, ba = combine(a, b), combine(b, a)
        np.testing.assert_allclose(ab.gramian, ba.gramian, atol=1e-10)
        np.testing.assert_allclose(ab.inverse, ba.inverse, atol=1e-10)
        np.testing.assert_allclose(ab.moment, ba.moment, atol=1e-10)

    def test_pool_equals_chained_combine(self):
        parts = [self._state(self.X[i::3], self.yx[i::3]) for i in range(3)]
        pooled = pool(parts, self.d)
        chained = combine(combine(parts[0], parts[1]), parts[2])
        np.testing.assert_allclose(pooled.gramian, chained.gramian, atol=1e-12)
        assert pooled.count == chained.count

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            combine(new_state(2), new_state(3))
        with pytest.raises(ValueError):
            retire(new_state(2), new_state(3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 8),
       n_keep=st.integers(0, 60), n_sub=st.integers(0, 60))
def test_combine_retire_roundtrip(seed, d, n_keep, n_sub):
    rng = np.random.default_rng(seed)
    xs, ys = unit_ball(rng, n_keep + n_sub, d), rng.standard_normal(n_keep + n_sub)
    s, u = new_state(d), new_state(d)
    for k, (x, y) in enumerate(zip(xs, ys)):
        s.absorb(x, y)
        if k >= n_keep:
            u.absorb(x, y)
    back = combine(retire(s, u), u)
    np.testing.assert_allclose(back.gramian, s.gramian, atol=1e-8)
    np.testing.assert_allclose(back.moment, s.moment, atol=1e-8)
    np.testing.assert_allclose(back.inverse, s.inverse, atol=1e-8)
    assert back.count == s.count


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 12), n=st.integers(1, 1500))
def test_maintained_inverse_property(seed, d, n):
    rng = np.random.default_rng(seed)
    s = new_state(d)
    for x in unit_ball(rng, n, d):
        s.absorb(x, float(rng.standard_normal()))
    assert np.abs(s.gramian @ s.inverse - np.eye(d)).max() <= 1e-8
    assert np.abs(s.inverse - np.linalg.inv(s.gramian)).max() <= 1e-8
    assert s.log_det == pytest.approx(np.linalg.slogdet(s.gramian)[1], abs=1e-8)
