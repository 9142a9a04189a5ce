"""
Tests for advantage, reachability and the incomplete-reward certificate.
"""
import numpy as np
import pytest

from conftest import A1, A2, S0, SL, SR, TERM
from harness.loader import load_builtin
from mdp.errors import ArgumentError
from mdp.models import PolicyTable, RewardTable, Selection
from mdp.oracle import random_mdp, random_reward
from incomplete.certificate import advantage, hitting_probability, occupancy, reachability, slacker_certificate

START = [1.0, 0.0, 0.0, 0.0]


def missing_reward(amount: float = 0.2) -> RewardTable:
    values = np.zeros((4, 2))
    values[S0, A2] = amount
    return RewardTable(values=values)


def always(action: int) -> PolicyTable:
    return PolicyTable.deterministic([action] * 4, 2)


def test_advantage(twopath, rng):
    """Test advantages under a fixed policy."""
    assert advantage(twopath, always(A1), missing_reward(), S0, A2) == pytest.approx(0.2, abs=1e-12)
    assert advantage(twopath, always(A1), missing_reward(), S0, A1) == pytest.approx(0.0, abs=1e-12)

    # On-policy actions of a deterministic policy have zero advantage
    mdp = random_mdp(rng, 5, 3, 0.9)
    r = random_reward(rng, mdp)
    choice = rng.integers(3, size=5)
    pi = PolicyTable.deterministic(choice.tolist(), 3)
    for s in range(5):
        assert advantage(mdp, pi, r, s, int(choice[s])) == pytest.approx(0.0, abs=1e-10)


def test_occupancy_twopath(twopath):
    """Test discounted occupancy along the left branch."""
    d = occupancy(twopath, always(A1), START)
    np.testing.assert_allclose(d, [1.0, 0.9, 0.0, 0.81 / 0.1], atol=1e-10)
    assert reachability(twopath, always(A1), START, SR) == pytest.approx(0.0, abs=1e-15)
    assert reachability(twopath, always(A2), START, SR) == pytest.approx(0.9)
    assert d.sum() == pytest.approx(1.0 / (1.0 - 0.9))


def test_hitting_probability(twopath):
    """Test finite-horizon hitting probabilities."""
    assert hitting_probability(twopath, always(A1), START, SL, 0) == 0.0
    assert hitting_probability(twopath, always(A1), START, SL, 1) == 1.0
    assert hitting_probability(twopath, always(A1), START, SR, 10) == 0.0
    assert hitting_probability(twopath, PolicyTable.uniform(4, 2), START, TERM, 2) == pytest.approx(1.0)
    assert hitting_probability(twopath, PolicyTable.uniform(4, 2), START, SR, 3) == pytest.approx(0.5)
    with pytest.raises(ArgumentError):
        hitting_probability(twopath, always(A1), START, SL, -1)


def test_reachability_agrees_with_hitting(rng):
    """Test that positive occupancy matches hitting within n_states steps."""
    for _ in range(50):
        mdp = random_mdp(rng, 6, 2, 0.9, sparsity=0.7)
        pi = PolicyTable.deterministic(rng.integers(2, size=6).tolist(), 2)
        mu = np.zeros(6)
        mu[0] = 1.0
        for s in range(6):
            reached = reachability(mdp, pi, mu, s) > 1e-12
            hit = hitting_probability(mdp, pi, mu, s, mdp.n_states) > 1e-12
            assert reached == hit


def test_slacker_twopath_lowest_index(twopath, tied_reward):
    """Test the witness when ties break towards a1."""
    cert = slacker_certificate(twopath, tied_reward, missing_reward(), START, focus_state=S0)
    assert cert.has_witness
    assert (cert.state, cert.action) == (S0, A2)
    assert cert.advantage_missing == pytest.approx(0.2, abs=1e-10)
    assert cert.reachability == pytest.approx(1.0)
    assert cert.true_value_gap == pytest.approx(0.2, abs=1e-10)
    assert cert.conditions_met.all_met
    assert cert.witness_count == 1
    assert cert.sound
    assert cert.train_optimal_actions == [A1, A2]
    assert cert.true_optimal_actions == [A2]


def test_slacker_twopath_highest_index(twopath, tied_reward):
    """Test that breaking ties towards a2 leaves nothing to certify."""
    cert = slacker_certificate(
        twopath, tied_reward, missing_reward(), START, selection=Selection.HIGHEST_INDEX, focus_state=S0
    )
    assert not cert.has_witness
    assert cert.action is None
    assert cert.state == S0
    assert cert.true_value_gap == 0.0
    assert not cert.conditions_met.all_met
    assert cert.train_optimal_actions == [A1, A2]


def test_slacker_control_and_unreachable(twopath, tied_reward):
    """Test the zero missing reward and a missing reward at an unvisited state."""
    control = slacker_certificate(twopath, tied_reward, RewardTable.zeros(twopath), START)
    assert not control.has_witness
    assert control.true_value_gap == 0.0
    assert control.state is None
    assert control.train_optimal_actions == []

    # sR is unvisited under the lowest-index policy from s0: no witness, yet the gap is positive
    values = np.zeros((4, 2))
    values[SR, A2] = 0.5
    hidden = slacker_certificate(twopath, tied_reward, RewardTable(values=values), START)
    assert not hidden.has_witness
    assert hidden.true_value_gap == pytest.approx(0.45, abs=1e-10)

    visible = slacker_certificate(twopath, tied_reward, RewardTable(values=values), [0.0, 0.0, 1.0, 0.0])
    assert visible.has_witness
    assert (visible.state, visible.action) == (SR, A2)


def test_slacker_grader_scenario():
    """Test the test-manipulation example from the built-in library."""
    scenario = load_builtin("grader")
    mdp = scenario.build_mdp()
    cert = slacker_certificate(
        mdp,
        scenario.build_reward("r_train"),
        scenario.build_reward("r_missing"),
        scenario.initial_distribution({"task": 1.0}),
        focus_state=0,
    )
    assert cert.has_witness
    assert mdp.action_name(cert.action) == "write_solution"
    assert cert.true_value_gap == pytest.approx(0.25, abs=1e-10)
    assert cert.sound
