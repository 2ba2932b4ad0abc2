import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_env
from oracles import kernel_by_advantages

from rsflab.geometry import adjoint, advantage_norm_sq, center, l2rho_inner
from rsflab.harness.envs import EnvironmentSpec, directed_cycle, generate_environment
from rsflab.kernel import (StochasticEnvironmentError, alt_form_quadratic, build_kernel,
                           closed_form_operator, k_quadratic_pair, kernel_quadratic,
                           advantage_norm_identities)
from rsflab.mdp import Mdp, Policy, policy_transition, q_function, stationary_weights


def _quad(op, r, w):
    return l2rho_inner(r, op.matrix @ r, w)


def _gridworld(gamma):
    return generate_environment(EnvironmentSpec("gridworld", width=3, height=3, gamma=gamma))


class TestBuildKernel:
    def test_constants_in_null_space(self, env_factory):
        for seed in range(5):
            mdp, pi0, w = env_factory(seed, n=5, m=3)
            k = build_kernel(mdp, pi0, w, 0.9)
            assert np.max(np.abs(k.kernel @ np.ones(w.num_sa))) <= 1e-9

    def test_single_action_kernel_vanishes(self, env_factory):
        mdp, pi0, w = env_factory(0, m=1)
        np.testing.assert_allclose(build_kernel(mdp, pi0, w, 0.9).kernel, 0.0, atol=1e-12)

    def test_end_to_end_advantage(self, env_factory, rng):
        mdp, pi0, w = env_factory(1, n=3, m=2)
        k = build_kernel(mdp, pi0, w, 0.9)
        for _ in range(100):
            r = rng.standard_normal(w.num_sa)
            adv = advantage_norm_sq(q_function(mdp, pi0, r), w, pi0)
            assert kernel_quadratic(k, r) == pytest.approx(adv, rel=1e-9)

    def test_matches_column_oracle(self, env_factory):
        mdp, pi0, w = env_factory(2, n=4, m=3)
        k = build_kernel(mdp, pi0, w, 0.7)
        oracle = kernel_by_advantages(policy_transition(mdp, pi0), pi0.probs, w.rho, 0.7)
        np.testing.assert_allclose(k.kernel, oracle, atol=1e-10)

    def test_quadratic_edge_cases(self, env_factory, rng):
        mdp, pi0, w = env_factory(3)
        k = build_kernel(mdp, pi0, w, 0.9)
        assert abs(kernel_quadratic(k, np.ones(w.num_sa))) <= 1e-9
        assert kernel_quadratic(k, np.zeros(w.num_sa)) == 0.0
        r = rng.standard_normal(w.num_sa)
        assert kernel_quadratic(k, 2 * r) == pytest.approx(4 * kernel_quadratic(k, r), rel=1e-12)

    def test_polar_form(self, env_factory, rng):
        mdp, pi0, w = env_factory(4)
        k = build_kernel(mdp, pi0, w, 0.8)
        r1, r2 = rng.standard_normal((2, w.num_sa))
        expect = (kernel_quadratic(k, r1 + r2) - kernel_quadratic(k, r1 - r2)) / 4
        assert k_quadratic_pair(k, r1, r2) == pytest.approx(expect, rel=1e-10, abs=1e-12)

    def test_selfadjoint_form(self, env_factory):
        from rsflab.geometry import RhoOperator
        mdp, pi0, w = env_factory(5, n=5, m=2)
        k = build_kernel(mdp, pi0, w, 0.95)
        op = RhoOperator(k.selfadjoint_form, w)
        np.testing.assert_allclose(adjoint(op).matrix, op.matrix, atol=1e-10)

    def test_eigenvalues_match_symmetric_similarity(self, env_factory):
        mdp, pi0, w = env_factory(6, n=4, m=3)
        k = build_kernel(mdp, pi0, w, 0.9)
        general = np.sort(np.real(np.linalg.eigvals(k.selfadjoint_form)))
        root = 1 / np.sqrt(w.rho)
        sym = np.sort(np.linalg.eigvalsh(root[:, None] * k.kernel * root[None, :]))
        np.testing.assert_allclose(general, sym, atol=1e-9)

    def test_rejects_gamma_one(self, env_factory):
        mdp, pi0, w = env_factory(0)
        with pytest.raises(ValueError):
            build_kernel(mdp, pi0, w, 1.0)

    def test_records_determinism(self):
        mdp, pi0, w = _gridworld(0.9)
        assert build_kernel(mdp, pi0, w, 0.9).deterministic_env


class TestClosedForm:
    def test_gamma_zero_cross_check(self, rng):
        mdp, pi0, w = make_env(0, n=5, m=2, deterministic=True, gamma=0.0)
        op = closed_form_operator(mdp, pi0, w, 0.0)
        k = build_kernel(mdp, pi0, w, 0.0)
        for _ in range(20):
            r = rng.standard_normal(w.num_sa)
            assert _quad(op, r, w) == pytest.approx(kernel_quadratic(k, r), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("gamma", [0.001, 0.5, 0.9, 0.999])
    def test_gridworld_cross_check(self, rng, gamma):
        mdp, pi0, w = _gridworld(gamma)
        op = closed_form_operator(mdp, pi0, w, gamma)
        k = build_kernel(mdp, pi0, w, gamma)
        for _ in range(100):
            r = rng.standard_normal(w.num_sa)
            q_k = kernel_quadratic(k, r)
            assert _quad(op, r, w) == pytest.approx(q_k, rel=1e-9)
            assert alt_form_quadratic(mdp, pi0, w, gamma, r) == pytest.approx(q_k, rel=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_deterministic_uniform(self, rng, seed):
        mdp, pi0, w = make_env(seed, n=4, m=3, deterministic=True, uniform=True, gamma=0.9)
        op = closed_form_operator(mdp, pi0, w, 0.9)
        k = build_kernel(mdp, pi0, w, 0.9)
        for _ in range(30):
            r = rng.standard_normal(w.num_sa)
            assert _quad(op, r, w) == pytest.approx(kernel_quadratic(k, r), rel=1e-9)

    def test_gamma_one_nonnegative_on_cycle(self, rng):
        mdp = Mdp.from_tensor(directed_cycle(5), 1.0)
        pi0 = Policy.uniform(5, 2)
        w = stationary_weights(mdp, pi0)
        op = closed_form_operator(mdp, pi0, w, 1.0)
        for _ in range(50):
            assert _quad(op, center(rng.standard_normal(w.num_sa), w), w) >= -1e-12
        np.testing.assert_allclose(op.matrix @ np.ones(w.num_sa), 0.0, atol=1e-12)

    def test_gamma_one_is_limit(self, rng):
        mdp = Mdp.from_tensor(directed_cycle(4), 1.0)
        pi0 = Policy.uniform(4, 2)
        w = stationary_weights(mdp, pi0)
        op1 = closed_form_operator(mdp, pi0, w, 1.0)
        r = center(rng.standard_normal(w.num_sa), w)
        near = build_kernel(mdp.with_gamma(1 - 1e-6), pi0, w, 1 - 1e-6)
        assert kernel_quadratic(near, r) == pytest.approx(_quad(op1, r, w), rel=1e-4)

    def test_self_adjoint(self):
        mdp, pi0, w = _gridworld(0.7)
        op = closed_form_operator(mdp, pi0, w, 0.7)
        np.testing.assert_allclose(adjoint(op).matrix, op.matrix, atol=1e-12)

    def test_stochastic_rejected(self, env_factory):
        mdp, pi0, w = env_factory(0)
        with pytest.raises(StochasticEnvironmentError):
            closed_form_operator(mdp, pi0, w, 0.5)
        with pytest.raises(StochasticEnvironmentError):
            alt_form_quadratic(mdp, pi0, w, 0.5, np.ones(w.num_sa))


class TestAltForm:
    def test_constant_and_zero(self):
        mdp, pi0, w = make_env(1, n=4, m=2, deterministic=True)
        assert abs(alt_form_quadratic(mdp, pi0, w, 0.9, np.ones(w.num_sa))) <= 1e-9
        assert alt_form_quadratic(mdp, pi0, w, 0.9, np.zeros(w.num_sa)) == 0.0

    def test_four_state_env(self, rng):
        mdp, pi0, w = make_env(2, n=4, m=2, deterministic=True, gamma=0.8)
        op = closed_form_operator(mdp, pi0, w, 0.8)
        r = rng.standard_normal(w.num_sa)
        assert alt_form_quadratic(mdp, pi0, w, 0.8, r) == pytest.approx(_quad(op, r, w), rel=1e-9)


class TestAdvantageNormIdentities:
    def test_constant_gives_zeros(self):
        mdp, pi0, w = make_env(0, n=4, m=2, deterministic=True)
        vals = advantage_norm_identities(np.ones(w.num_sa), mdp, pi0, w, 0.9)
        np.testing.assert_allclose(vals, 0.0, atol=1e-12)

    def test_cycle_gamma_one(self, rng):
        mdp = Mdp.from_tensor(directed_cycle(6), 1.0)
        pi0 = Policy.uniform(6, 2)
        w = stationary_weights(mdp, pi0)
        for _ in range(20):
            a, b, c = advantage_norm_identities(rng.standard_normal(w.num_sa), mdp, pi0, w, 1.0)
            assert b == pytest.approx(a, rel=1e-10, abs=1e-12)
            assert c == pytest.approx(a, rel=1e-10, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 500), gamma=st.floats(0.001, 1.0))
    def test_triple_identity_property(self, seed, gamma):
        mdp, pi0, w = make_env(seed, n=4, m=2, deterministic=True)
        f = np.random.default_rng(seed).standard_normal(w.num_sa)
        a, b, c = advantage_norm_identities(f, mdp, pi0, w, gamma)
        assert abs(b - a) <= 1e-9 * max(1.0, abs(a))
        assert abs(c - a) <= 1e-9 * max(1.0, abs(a))

    def test_gamma_zero_third_is_nan(self):
        mdp, pi0, w = make_env(0, n=3, m=2, deterministic=True)
        assert np.isnan(advantage_norm_identities(np.arange(6.0), mdp, pi0, w, 0.0)[2])

    def test_stochastic_violation_is_positive(self, rng):
        mdp, pi0, w = make_env(3, n=4, m=2)
        with pytest.raises(StochasticEnvironmentError):
            advantage_norm_identities(np.ones(w.num_sa), mdp, pi0, w, 0.9)
        f = rng.standard_normal(w.num_sa)
        a, b, _ = advantage_norm_identities(f, mdp, pi0, w, 0.9, check_determinism=False)
        # the gap is the next-state variance of the pi0-averaged f
        v = (pi0.probs * f.reshape(pi0.probs.shape)).sum(axis=1)
        p = mdp.transition
        variance = w.rho @ (p @ v**2 - (p @ v) ** 2)
        assert b - a == pytest.approx(variance, rel=1e-9)
        assert b - a > 1e-3
