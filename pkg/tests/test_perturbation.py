"""
Tests for bumps, the inverse Bellman map, discontinuity sequences and tie-breakers.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from conftest import A1, A2, S0, make_twopath, twopath_reward
from mdp.errors import ArgumentError, PreconditionError
from mdp.models import FiniteMdp, PolicyTable, QTable, RewardTable, Selection
from mdp.oracle import random_mdp
from mdp.solver import bellman_backup
from perturbation.constructions import (
    discontinuity_sequence, epsilon_sequence, inverse_bellman, make_bump, tie_breaker, tie_breaker_report,
)
from perturbation.distances import max_state_tv, tv_distance
from perturbation.models import BumpTable


def test_make_bump(twopath):
    """Test the indicator bump and its validation."""
    bump = make_bump(twopath, (S0, A2), protected=[A1])
    assert bump.values[S0, A2] == 1.0
    assert bump.values.sum() == 1.0
    assert bump.sup_norm == 1.0

    with pytest.raises(ArgumentError):
        make_bump(twopath, (S0, A1), protected=[A1])
    with pytest.raises(ArgumentError):
        make_bump(twopath, (S0, 5))

    values = np.zeros((4, 2))
    values[S0, A2] = 1.0
    values[S0, A1] = 0.5
    with pytest.raises(ValidationError):
        BumpTable(values=values, center=(S0, A2), protected=[A1])


def test_inverse_bellman_is_exact(rng):
    """Test that T_{R_q}(q) = q for arbitrary q."""
    for _ in range(50):
        mdp = random_mdp(rng, 5, 3, float(rng.choice([0.0, 0.5, 0.9])))
        q = QTable(values=rng.normal(size=mdp.shape))
        r = inverse_bellman(q, mdp)
        np.testing.assert_allclose(bellman_backup(q, r, mdp).values, q.values, atol=1e-12)


def test_discontinuity_sequence_twopath(twopath, tied_reward):
    """Test the certificate on the two-path MDP across shrinking eps."""
    for eps in (1e-1, 1e-3, 1e-6):
        cert = discontinuity_sequence(twopath, tied_reward, S0, A2, eps)
        assert cert.valid
        assert cert.reward_distance <= eps * 1.9
        assert cert.switched_action_set.actions == [A2]
        assert cert.target_gap == pytest.approx(eps, abs=1e-9)
        assert cert.tv_jump == 0.5
        assert cert.tied_actions == [A1, A2]
        assert cert.suboptimal_preserved


def test_discontinuity_sequence_selection_rules(twopath, tied_reward):
    """Test the TV jump under deterministic selection rules."""
    lowest = discontinuity_sequence(twopath, tied_reward, S0, A2, 1e-3, selection=Selection.LOWEST_INDEX)
    assert lowest.tv_jump == 1.0
    highest = discontinuity_sequence(twopath, tied_reward, S0, A2, 1e-3, selection=Selection.HIGHEST_INDEX)
    assert highest.tv_jump == 0.0


def test_discontinuity_sequence_three_way_tie():
    """Test the (m - 1) / m jump with three tied actions and one suboptimal action."""
    transition = np.zeros((2, 4, 2))
    transition[0, :, 1] = 1.0
    transition[1, :, 1] = 1.0
    mdp = FiniteMdp.from_transition(transition, 0.9)
    r0 = RewardTable(values=[[1.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
    cert = discontinuity_sequence(mdp, r0, 0, 1, 1e-2)
    assert cert.valid
    assert cert.tied_actions == [0, 1, 2]
    assert cert.tv_jump == pytest.approx(2 / 3, abs=1e-12)


def test_discontinuity_sequence_random_degenerate(rng):
    """Test certificates on random MDPs made degenerate through the inverse Bellman map."""
    for _ in range(30):
        mdp = random_mdp(rng, 4, 3, 0.9)
        q0 = rng.normal(size=mdp.shape)
        q0[0, 1] = q0[0].max() + 0.5
        q0[0, 2] = q0[0, 1]
        r0 = inverse_bellman(QTable(values=q0), mdp)
        cert = discontinuity_sequence(mdp, r0, 0, 2, 1e-3)
        assert cert.valid
        assert cert.reward_distance <= 1e-3 * 1.9 + 1e-12


def test_discontinuity_preconditions(twopath, tied_reward):
    """Test the error contract."""
    unique = np.array(tied_reward.values)
    unique[S0, A2] = 2.0
    with pytest.raises(PreconditionError):
        discontinuity_sequence(twopath, RewardTable(values=unique), S0, A1, 1e-3)
    with pytest.raises(ArgumentError):
        discontinuity_sequence(twopath, tied_reward, S0, A2, 0.0)


@pytest.mark.parametrize("gamma", [0.5, 0.9])
@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_tie_breaker_gap(gamma, eps):
    """Test that the promoted action wins by eps / (1 + gamma)."""
    mdp = make_twopath(gamma)
    report = tie_breaker_report(mdp, twopath_reward(), S0, A1, A2, eps)
    assert report.gap == pytest.approx(eps / (1 + gamma), abs=1e-8)
    assert report.gap == pytest.approx(report.expected_gap, abs=1e-8)
    assert report.promoted_unique
    assert report.optimal_actions == [A2]
    assert report.reward_distance <= eps + 1e-12


def test_tie_breaker_errors(twopath, tied_reward):
    """Test tie-breaker argument checks."""
    with pytest.raises(ArgumentError):
        tie_breaker(twopath, tied_reward, S0, A1, A1, 1e-2)
    with pytest.raises(ArgumentError):
        tie_breaker(twopath, tied_reward, S0, A1, A2, -1e-2)

    # Strict mode rejects eps above half the smallest suboptimality gap
    transition = np.zeros((2, 3, 2))
    transition[:, :, 1] = 1.0
    mdp = FiniteMdp.from_transition(transition, 0.5)
    r0 = RewardTable(values=[[1.0, 1.0, 0.9], [0.0, 0.0, 0.0]])
    assert tie_breaker(mdp, r0, 0, 0, 1, 0.04, strict=True).values.shape == (2, 3)
    with pytest.raises(PreconditionError):
        tie_breaker(mdp, r0, 0, 0, 1, 0.06, strict=True)


def test_tv_distance_examples():
    """Test TV on hand cases."""
    assert tv_distance([1.0, 0.0], [0.5, 0.5]) == 0.5
    assert tv_distance([1.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]) == pytest.approx(2 / 3)
    assert tv_distance([0.2, 0.8], [0.2, 0.8]) == 0.0
    with pytest.raises(ArgumentError):
        tv_distance([0.5, 0.5], [1.0, 0.0, 0.0])
    with pytest.raises(ArgumentError):
        tv_distance([0.5, 0.6], [0.5, 0.5])

    pi1 = PolicyTable(probs=[[1.0, 0.0], [0.5, 0.5]])
    pi2 = PolicyTable(probs=[[0.0, 1.0], [0.5, 0.5]])
    assert max_state_tv(pi1, pi2) == 1.0


distributions = st.integers(min_value=2, max_value=6).flatmap(
    lambda n: st.tuples(*[st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n) for _ in range(3)])
)


@settings(max_examples=200, deadline=None)
@given(distributions)
def test_tv_is_a_metric(rows):
    """Test symmetry, range and the triangle inequality."""
    p, q, w = (np.array(row) / np.sum(row) for row in rows)
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)
    assert 0.0 <= tv_distance(p, q) <= 1.0
    assert tv_distance(p, w) <= tv_distance(p, q) + tv_distance(q, w) + 1e-12


def test_epsilon_sequence():
    """Test the geometric eps grid."""
    assert epsilon_sequence(0.1, 0.5, 3) == pytest.approx([0.1, 0.05, 0.025])
