"""
Tests for the brute-force oracle.
"""
import numpy as np
import pytest

from conftest import A1, A2, S0
from mdp.errors import InstanceTooLargeError
from mdp.models import FiniteMdp, PolicyTable, RewardTable
from mdp.oracle import (
    brute_force_optimal_policies, brute_force_optimal_value, brute_force_q_star,
    evaluate_deterministic_policies, random_mdp, random_reward,
)
from mdp.solver import policy_evaluation, solve_q_star


def test_oracle_matches_value_iteration(rng):
    """Test solve_q_star against exhaustive policy enumeration."""
    checked = 0
    while checked < 100:
        n_states = int(rng.integers(1, 6))
        n_actions = int(rng.integers(1, 5))
        if n_actions ** n_states > 10_000:
            continue
        gamma = float(rng.choice([0.5, 0.9, 0.99]))
        mdp = random_mdp(rng, n_states, n_actions, gamma, sparsity=0.4)
        r = random_reward(rng, mdp)
        q_vi = solve_q_star(mdp, r)
        q_bf = brute_force_q_star(mdp, r)
        assert np.max(np.abs(q_vi.values - q_bf.values)) <= 1e-8
        checked += 1


def test_deterministic_batch_matches_policy_evaluation(rng):
    """Test the batched solve against policy_evaluation on point-mass policies."""
    mdp = random_mdp(rng, 4, 3, 0.9)
    r = random_reward(rng, mdp)
    choices = rng.integers(3, size=(10, 4))
    q_batch = evaluate_deterministic_policies(mdp, r, choices)
    for k, row in enumerate(choices):
        q, _ = policy_evaluation(mdp, PolicyTable.deterministic(row, 3), r)
        np.testing.assert_allclose(q_batch[k], q.values, atol=1e-10)


def test_oracle_single_state_examples():
    """Test the oracle on one-state MDPs with known values."""
    self_loop = FiniteMdp.from_transition(np.ones((1, 1, 1)), 0.5)
    np.testing.assert_allclose(brute_force_q_star(self_loop, RewardTable(values=[[1.0]])).values, [[2.0]])

    myopic = FiniteMdp.from_transition(np.ones((1, 2, 1)), 0.0)
    r = RewardTable(values=[[1.0, -0.5]])
    np.testing.assert_allclose(brute_force_q_star(myopic, r).values, r.values)


def test_oracle_twopath(twopath, tied_reward):
    """Test the oracle on the tied two-path MDP."""
    assert brute_force_optimal_value(twopath, tied_reward, [1.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert brute_force_optimal_policies(twopath, tied_reward, S0) == [A1, A2]

    bonus = np.array(tied_reward.values)
    bonus[S0, A2] += 0.2
    assert brute_force_optimal_policies(twopath, RewardTable(values=bonus), S0) == [A2]


def test_oracle_size_guard():
    """Test that enumeration refuses oversized instances."""
    mdp = FiniteMdp.from_transition(np.full((17, 2, 17), 1.0 / 17), 0.5)
    with pytest.raises(InstanceTooLargeError):
        brute_force_q_star(mdp, RewardTable.zeros(mdp))
