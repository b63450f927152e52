import itertools

import numpy as np
import pytest

from wayward.mdp import (
    MdpDynamics,
    NotConverged,
    SingularSystem,
    SizeLimitExceeded,
    brute_force_optimal,
    bellman_backup,
    greedy_policy,
    policy_evaluation,
    validate_mdp,
    value_iteration,
)


def make_mdp(transitions, discount):
    return MdpDynamics(np.asarray(transitions, dtype=float), discount)


def self_loop(discount):
    return make_mdp([[[1.0]]], discount)


def two_state_chain(discount=0.9):
    # s0 -action0-> s1 (reward 0); s1 self-loops under both actions (reward 1).
    # action 1 stays put everywhere.
    p = np.zeros((2, 2, 2))
    p[0, 0, 1] = 1.0
    p[0, 1, 1] = 1.0
    p[1, 0, 0] = 1.0
    p[1, 1, 1] = 1.0
    r = np.array([[0.0, 0.0], [1.0, 1.0]])
    return make_mdp(p, discount), r


def random_mdp(rng, n_states, n_actions, discount=0.9):
    p = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    r = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    return make_mdp(p, discount), r


class TestValidateMdp:
    def test_well_formed(self):
        p = np.array([[[0.5, 0.5], [0.2, 0.8]], [[1.0, 0.0], [0.0, 1.0]]])
        assert validate_mdp(make_mdp(p, 0.9)).ok

    def test_row_not_summing_to_one(self):
        p = np.array([[[0.5, 0.5], [0.2, 0.7]], [[1.0, 0.0], [0.0, 1.0]]])
        result = validate_mdp(make_mdp(p, 0.9))
        assert not result.ok
        assert [(v.kind, v.where) for v in result.violations] == [
            ("TransitionNotStochastic", (0, 1))
        ]

    def test_discount_one_rejected(self):
        result = validate_mdp(self_loop(1.0))
        assert result.kinds() == {"DiscountOutOfRange"}

    def test_negative_discount_rejected(self):
        assert "DiscountOutOfRange" in validate_mdp(self_loop(-0.1)).kinds()

    def test_non_finite_entry(self):
        p = np.array([[[np.nan, 1.0], [0.0, 1.0]]])
        result = validate_mdp(make_mdp(p, 0.5))
        assert ("NonFiniteEntry", (0, 0, 0)) in [(v.kind, v.where) for v in result.violations]

    def test_negative_probability_flagged_even_if_row_sums_to_one(self):
        p = np.array([[[-0.5, 1.5], [0.0, 1.0]]])
        result = validate_mdp(make_mdp(p, 0.5))
        assert ("TransitionNotStochastic", (0, 0)) in [
            (v.kind, v.where) for v in result.violations
        ]


class TestValueIteration:
    def test_single_state_geometric_series(self):
        v, _ = value_iteration(self_loop(0.5), np.array([[1.0]]))
        assert v == pytest.approx([2.0], abs=1e-7)

    def test_discount_zero_is_myopic(self):
        rng = np.random.default_rng(0)
        mdp, r = random_mdp(rng, 4, 3, discount=0.0)
        v, _ = value_iteration(mdp, r)
        np.testing.assert_allclose(v, r.max(axis=1), atol=1e-12)

    def test_two_state_chain_against_exact_solve(self):
        # Oracle: exact policy evaluation of the optimal policy (move, then
        # stay) gives V = (I - gamma * P_pi)^-1 R_pi = [9, 10] at gamma 0.9.
        mdp, r = two_state_chain()
        oracle = policy_evaluation(mdp, r, np.array([0, 0]))
        np.testing.assert_allclose(oracle, [9.0, 10.0], atol=1e-9)
        v, _ = value_iteration(mdp, r, tolerance=1e-10)
        np.testing.assert_allclose(v, [9.0, 10.0], atol=1e-7)

    def test_returned_values_meet_residual_contract(self):
        rng = np.random.default_rng(5)
        mdp, r = random_mdp(rng, 6, 3, discount=0.95)
        tol = 1e-6
        v, _ = value_iteration(mdp, r, tolerance=tol)
        residual = np.max(np.abs(bellman_backup(mdp, r, v) - v))
        assert residual <= tol

    def test_not_converged_raises(self):
        with pytest.raises(NotConverged) as exc:
            value_iteration(self_loop(0.99), np.array([[1.0]]), tolerance=1e-12, max_iterations=3)
        assert exc.value.residual > 1e-12

    def test_value_bound(self):
        rng = np.random.default_rng(17)
        mdp, r = random_mdp(rng, 5, 2, discount=0.9)
        v, _ = value_iteration(mdp, r)
        assert np.max(np.abs(v)) <= np.max(np.abs(r)) / (1 - mdp.discount) + 1e-9

    def test_contraction_toward_fixed_point(self):
        rng = np.random.default_rng(23)
        mdp, r = random_mdp(rng, 5, 3, discount=0.8)
        v_star, _ = value_iteration(mdp, r, tolerance=1e-12)
        v = np.zeros(5)
        prev_err = np.max(np.abs(v - v_star))
        for _ in range(20):
            v = bellman_backup(mdp, r, v)
            err = np.max(np.abs(v - v_star))
            assert err <= mdp.discount * prev_err + 1e-12
            prev_err = err

    def test_reward_shift_moves_values_by_constant(self):
        rng = np.random.default_rng(31)
        mdp, r = random_mdp(rng, 5, 3, discount=0.9)
        c = 2.5
        v, _ = value_iteration(mdp, r, tolerance=1e-10)
        v_shift, _ = value_iteration(mdp, r + c, tolerance=1e-10)
        np.testing.assert_allclose(v_shift, v + c / (1 - mdp.discount), atol=1e-6)
        assert np.array_equal(
            greedy_policy(mdp, r, v), greedy_policy(mdp, r + c, v_shift)
        )


class TestGreedyPolicy:
    def test_reward_dominates_when_values_equal(self):
        p = np.zeros((2, 2, 2))
        p[:, :, 0] = 1.0
        mdp = make_mdp(p, 0.9)
        r = np.array([[0.1, 0.7], [0.0, 0.0]])
        pi = greedy_policy(mdp, r, np.zeros(2))
        assert pi[0] == 1

    def test_tie_breaks_to_lowest_action(self):
        p = np.zeros((3, 1, 1))
        p[:, 0, 0] = 1.0
        mdp = make_mdp(p, 0.5)
        r = np.array([[0.4, 0.1, 0.4]])
        assert greedy_policy(mdp, r, np.zeros(1))[0] == 0

    def test_two_state_chain_moves_to_rewarding_state(self):
        mdp, r = two_state_chain()
        v, _ = value_iteration(mdp, r)
        pi = greedy_policy(mdp, r, v)
        assert pi[0] == 0  # move to s1


class TestPolicyEvaluation:
    def test_self_loop(self):
        v = policy_evaluation(self_loop(0.5), np.array([[1.0]]), np.array([0]))
        assert v == pytest.approx([2.0], abs=1e-12)

    def test_discount_zero_returns_reward(self):
        rng = np.random.default_rng(2)
        mdp, r = random_mdp(rng, 4, 3, discount=0.0)
        pi = np.array([2, 0, 1, 1])
        v = policy_evaluation(mdp, r, pi)
        np.testing.assert_allclose(v, r[np.arange(4), pi], atol=1e-15)

    def test_cross_solver_consistency(self):
        rng = np.random.default_rng(42)
        mdp, r = random_mdp(rng, 4, 3)
        v_star, _ = value_iteration(mdp, r, tolerance=1e-12)
        pi = greedy_policy(mdp, r, v_star)
        np.testing.assert_allclose(policy_evaluation(mdp, r, pi), v_star, atol=1e-6)

    def test_exact_linear_residual(self):
        rng = np.random.default_rng(8)
        mdp, r = random_mdp(rng, 6, 2, discount=0.97)
        pi = np.zeros(6, dtype=int)
        v = policy_evaluation(mdp, r, pi)
        states = np.arange(6)
        residual = v - (r[states, pi] + mdp.discount * mdp.transitions[pi, states, :] @ v)
        assert np.max(np.abs(residual)) <= 1e-9


class TestBruteForce:
    def test_single_action(self):
        mdp, r = random_mdp(np.random.default_rng(1), 3, 1)
        assert np.array_equal(brute_force_optimal(mdp, r), [0, 0, 0])

    def test_size_limit(self):
        mdp, r = random_mdp(np.random.default_rng(1), 10, 4)
        with pytest.raises(SizeLimitExceeded):
            brute_force_optimal(mdp, r)

    def test_exhaustive_deterministic_sweep_agrees_with_greedy(self):
        # Every 2-action, 3-state deterministic transition structure with
        # rewards in {0, 1}; policies disagreeing only on value ties allowed.
        n_states, n_actions = 3, 2
        discount = 0.45
        failures = []
        for targets in itertools.product(range(n_states), repeat=n_states * n_actions):
            p = np.zeros((n_actions, n_states, n_states))
            for idx, target in enumerate(targets):
                s, a = divmod(idx, n_actions)
                p[a, s, target] = 1.0
            mdp = MdpDynamics(p, discount)
            for bits in itertools.product((0.0, 1.0), repeat=n_states * n_actions):
                r = np.array(bits).reshape(n_states, n_actions)
                v, _ = value_iteration(mdp, r, tolerance=1e-10)
                fast = greedy_policy(mdp, r, v)
                slow = brute_force_optimal(mdp, r)
                if not np.array_equal(fast, slow):
                    gap = abs(
                        policy_evaluation(mdp, r, fast).sum()
                        - policy_evaluation(mdp, r, slow).sum()
                    )
                    if gap > 1e-6:
                        failures.append((targets, bits, gap))
        assert not failures
