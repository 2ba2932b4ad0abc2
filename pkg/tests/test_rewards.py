import numpy as np
import pytest

from rsflab import _kernels
from rsflab.geometry import l2rho_norm_sq
from rsflab.kernel import build_kernel
from rsflab.mdp import StateActionWeights, q_function
from rsflab.rewards import (RewardModel, expected_quadratic, rho_integral, sample_reward,
                            sample_rewards, second_moment)


def _uniform(n):
    return StateActionWeights(np.full(n, 1.0 / n), 1)


class TestRewardModel:
    def test_aliases(self):
        assert RewardModel("goal").kind == "goal_reaching"
        assert RewardModel("white_noise").kind == "gaussian"

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            RewardModel("laplace")

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            RewardModel("scattered", kappa=0.0)
        with pytest.raises(ValueError):
            RewardModel("scattered", sigma2=-1.0)

    def test_config_round_trip(self):
        m = RewardModel("scattered", kappa=2.5, mu=-1.0, sigma2=0.25, weight_law="rademacher")
        assert RewardModel.from_config(m.to_config()) == m


class TestSampling:
    def test_goal_integrates_to_one(self, env_factory, rng):
        _, _, w = env_factory(0, n=5, m=3)
        for _ in range(50):
            s = sample_reward(RewardModel("goal"), w, rng)
            assert rho_integral(s, w) == 1.0
            assert np.count_nonzero(s.reward) == 1

    def test_scattered_with_no_points_is_zero(self, env_factory, rng):
        _, _, w = env_factory(1)
        # kappa -> 0+: N = 0 with probability 1 - 1e-12
        s = sample_reward(RewardModel("scattered", kappa=1e-12), w, rng)
        assert s.count == 0
        np.testing.assert_array_equal(s.reward, 0.0)

    def test_gaussian_variance_on_uniform_rho(self, rng):
        n = 4
        r = sample_rewards(RewardModel("gaussian"), _uniform(n), rng, 100_000).rewards
        var = r.var(axis=0, ddof=1)
        # Var of the sample variance of a normal is 2 sigma^4 / (N - 1)
        se = np.sqrt(2 * n**2 / (r.shape[0] - 1))
        assert np.all(np.abs(var - n) <= 3 * se)

    def test_gaussian_norm_mean(self, env_factory, rng):
        _, _, w = env_factory(2, n=4, m=2)
        r = sample_rewards(RewardModel("gaussian"), w, rng, 20_000).rewards
        norms = (r * r) @ w.rho
        assert abs(norms.mean() - w.num_sa) <= 3 * norms.std(ddof=1) / np.sqrt(norms.size)

    def test_scattered_counts(self, env_factory, rng):
        _, _, w = env_factory(3)
        batch = sample_rewards(RewardModel("scattered", kappa=3.0, mu=1.0), w, rng, 50_000)
        n = batch.counts.astype(float)
        se = n.std(ddof=1) / np.sqrt(n.size)
        assert abs(n.mean() - 3.0) <= 3 * se
        ff = n * (n - 1)
        assert abs(ff.mean() - 9.0) <= 3 * ff.std(ddof=1) / np.sqrt(n.size)

    def test_batch_matches_single_draw_law(self, env_factory, rng):
        _, _, w = env_factory(4, n=3, m=2)
        model = RewardModel("scattered", kappa=2.0, mu=0.5, sigma2=0.3)
        batch = sample_rewards(model, w, rng, 30_000).rewards
        singles = np.array([sample_reward(model, w, rng).reward for _ in range(30_000)])
        for stat in (lambda x: x @ w.rho, lambda x: (x * x) @ w.rho):
            a, b = stat(batch), stat(singles)
            se = np.hypot(a.std(ddof=1), b.std(ddof=1)) / np.sqrt(a.size)
            assert abs(a.mean() - b.mean()) <= 4 * se

    def test_custom_weight_law(self, env_factory, rng):
        _, _, w = env_factory(5)
        model = RewardModel("scattered", kappa=2.0, weight_law=lambda g, size, mu, s2: np.ones(size))
        s = sample_reward(model, w, rng)
        assert np.allclose(s.weights, 1.0)


class TestSecondMoment:
    def test_gaussian(self, env_factory):
        _, _, w = env_factory(0)
        np.testing.assert_allclose(second_moment(RewardModel("gaussian"), w), np.diag(1 / w.rho))

    def test_scattered_mean_zero(self, env_factory):
        _, _, w = env_factory(1)
        got = second_moment(RewardModel("scattered", kappa=2.0, mu=0.0, sigma2=0.7), w)
        np.testing.assert_allclose(got, 1.4 * np.diag(1 / w.rho))

    def test_two_point_example(self, rng):
        w = _uniform(2)
        model = RewardModel("scattered", kappa=2.0, mu=1.0, sigma2=0.5)
        exact = second_moment(model, w)
        np.testing.assert_allclose(exact, 3 * np.diag([2.0, 2.0]) + 4 * np.ones((2, 2)))
        r = sample_rewards(model, w, rng, 1_000_000).rewards
        mean, se = _kernels.outer_moments(r)
        assert np.all(np.abs(mean - exact) <= 3 * se)


class TestExpectedQuadratic:
    def test_zero_matrix(self, env_factory):
        _, _, w = env_factory(0)
        assert expected_quadratic(np.zeros((w.num_sa,) * 2), RewardModel("gaussian"), w) == 0.0

    def test_rho_hat_gives_dimension(self, env_factory):
        _, _, w = env_factory(1, n=5, m=3)
        assert expected_quadratic(np.diag(w.rho), RewardModel("gaussian"), w) == pytest.approx(15.0)

    def test_rejects_asymmetric(self, env_factory, rng):
        _, _, w = env_factory(2)
        with pytest.raises(ValueError):
            expected_quadratic(rng.standard_normal((w.num_sa, w.num_sa)), RewardModel("gaussian"), w)

    def test_goal_model_kernel_against_mc(self, env_factory, rng):
        mdp, pi0, w = env_factory(3, n=3, m=2)
        k = build_kernel(mdp, pi0, w, 0.9)
        model = RewardModel("goal")
        exact = expected_quadratic(k.kernel, model, w)
        r = sample_rewards(model, w, rng, 10_000).rewards
        vals = np.einsum("bi,ij,bj->b", r, k.kernel, r)
        assert abs(vals.mean() - exact) <= 3 * vals.std(ddof=1) / np.sqrt(vals.size)
        # same number through the advantage of each sampled reward
        from rsflab.geometry import advantage_norm_sq
        direct = [advantage_norm_sq(q_function(mdp, pi0, x), w, pi0) for x in r[:50]]
        np.testing.assert_allclose(direct, vals[:50], rtol=1e-9)


def test_l2_norm_of_goal_sample(env_factory, rng):
    _, _, w = env_factory(6)
    s = sample_reward(RewardModel("goal"), w, rng)
    assert l2rho_norm_sq(s.reward, w) == pytest.approx(1.0 / w.rho[s.goal])
