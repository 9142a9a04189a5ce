"""
Advantage, reachability and the incomplete-reward ("clever slacker") certificate.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np

from mdp.errors import ArgumentError
from mdp.models import DEFAULT_TOL, FiniteMdp, PolicyTable, RewardTable, Selection
from mdp.solver import (
    as_distribution, check_shape, default_tie_tolerance, greedy_policy, optimal_action_set,
    policy_evaluation, solve_q_star,
)

from .models import SlackerCertificate, SlackerConditions

logger = logging.getLogger(__name__)

REACHABILITY_THRESHOLD = 1e-12
ZERO_GAP = 1e-12


def advantage(mdp: FiniteMdp, policy: PolicyTable, r: RewardTable, state: int, action: int) -> float:
    """A^pi_r(s, a) = Q^pi_r(s, a) - V^pi_r(s)."""
    q, v = policy_evaluation(mdp, policy, r)
    return float(q.values[state, action] - v.values[state])


def _state_transition(mdp: FiniteMdp, policy: PolicyTable) -> np.ndarray:
    """P_pi[s, s'] = sum_a pi(a|s) P(s'|s, a)."""
    return np.einsum("sa,sat->st", policy.probs, mdp.transition)


def occupancy(mdp: FiniteMdp, policy: PolicyTable, mu: Sequence[float]) -> np.ndarray:
    """Discounted occupancy d = sum_t gamma^t Pr(s_t = . | mu, pi), from (I - gamma P_pi^T) d = mu."""
    check_shape(policy.probs, mdp, "Policy table")
    initial = as_distribution(mu, mdp.n_states, "Initial distribution")
    if mdp.discount == 0.0:
        return initial.copy()
    system = np.eye(mdp.n_states) - mdp.discount * _state_transition(mdp, policy).T
    return np.linalg.solve(system, initial)


def reachability(mdp: FiniteMdp, policy: PolicyTable, mu: Sequence[float], state: int) -> float:
    """Discounted occupancy of one state; positive iff the state is ever visited."""
    return max(0.0, float(occupancy(mdp, policy, mu)[state]))


def hitting_probability(
    mdp: FiniteMdp,
    policy: PolicyTable,
    mu: Sequence[float],
    state: int,
    horizon: int,
) -> float:
    """Probability that state is visited at some step t <= horizon."""
    if horizon < 0:
        raise ArgumentError(f"Horizon must be nonnegative, got {horizon}")
    initial = as_distribution(mu, mdp.n_states, "Initial distribution")
    p_pi = _state_transition(mdp, policy)
    hit = float(initial[state])
    mass = initial.copy()
    mass[state] = 0.0
    for _ in range(horizon):
        mass = mass @ p_pi
        hit += float(mass[state])
        mass[state] = 0.0
    return min(1.0, hit)


def slacker_certificate(
    mdp: FiniteMdp,
    r_train: RewardTable,
    r_missing: RewardTable,
    mu: Sequence[float],
    selection: Union[Selection, str] = Selection.LOWEST_INDEX,
    tie_tolerance: Optional[float] = None,
    focus_state: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> SlackerCertificate:
    """
    Search for a witness (s, a) showing the training-optimal policy is
    strictly suboptimal under r_true = r_train + r_missing.

    A witness has a optimal at s for r_train, positive advantage under
    r_missing for the greedy training policy (above the argmax tie
    tolerance) and positive discounted occupancy at s. Pairs are scanned in
    (state, action) order; the first witness fills the certificate and all
    witnesses are counted. The gap is mu . (V*_{r_true} - V^{pi_train}_{r_true})
    from two exact policy evaluations.
    """
    selection = Selection(selection)
    check_shape(r_train.values, mdp, "Training reward")
    check_shape(r_missing.values, mdp, "Missing reward")
    initial = as_distribution(mu, mdp.n_states, "Initial distribution")

    q_train = solve_q_star(mdp, r_train, tol=tol)
    pi_train = greedy_policy(q_train, selection, tie_tolerance)
    q_missing, v_missing = policy_evaluation(mdp, pi_train, r_missing)
    visits = occupancy(mdp, pi_train, initial)

    witnesses = []
    for s in range(mdp.n_states):
        if visits[s] <= REACHABILITY_THRESHOLD:
            continue
        threshold = default_tie_tolerance(q_train.values[s]) if tie_tolerance is None else tie_tolerance
        for a in optimal_action_set(q_train, s, tie_tolerance).actions:
            gain = float(q_missing.values[s, a] - v_missing.values[s])
            if gain > threshold:
                witnesses.append((s, a, gain))

    r_true = r_train + r_missing
    q_true = solve_q_star(mdp, r_true, tol=tol)
    pi_true = greedy_policy(q_true, Selection.LOWEST_INDEX, tie_tolerance)
    _, v_star = policy_evaluation(mdp, pi_true, r_true)
    _, v_train = policy_evaluation(mdp, pi_train, r_true)
    gap = float(initial @ (v_star.values - v_train.values))
    if gap < -ZERO_GAP:
        logger.warning(f"Greedy true-reward policy scores {gap:.3e} below the training policy")
    if abs(gap) < ZERO_GAP or gap < 0:
        gap = 0.0

    report_state = witnesses[0][0] if witnesses else focus_state
    train_actions = optimal_action_set(q_train, report_state, tie_tolerance).actions if report_state is not None else []
    true_actions = optimal_action_set(q_true, report_state, tie_tolerance).actions if report_state is not None else []

    if not witnesses:
        logger.info(f"No slacker witness under {selection.value}; gap={gap:.3e}")
        return SlackerCertificate(
            state=focus_state,
            true_value_gap=gap,
            selection=selection,
            train_optimal_actions=train_actions,
            true_optimal_actions=true_actions,
        )

    s, a, gain = witnesses[0]
    logger.info(
        f"Slacker witness ({mdp.state_name(s)}, {mdp.action_name(a)}): advantage={gain:.6g}, "
        f"occupancy={visits[s]:.6g}, gap={gap:.6g}, {len(witnesses)} witness(es)"
    )
    return SlackerCertificate(
        state=s,
        action=a,
        advantage_missing=gain,
        reachability=float(visits[s]),
        true_value_gap=gap,
        conditions_met=SlackerConditions(action_optimal=True, positive_advantage=True, reachable=True),
        witness_count=len(witnesses),
        selection=selection,
        train_optimal_actions=train_actions,
        true_optimal_actions=true_actions,
    )
