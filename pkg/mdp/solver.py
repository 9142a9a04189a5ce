"""
Exact Bellman machinery for finite MDPs: backups, value iteration, argmax
sets, greedy policies and exact policy evaluation.
"""
import logging
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ArgumentError, DimensionError, NonConvergenceError
from .models import (
    DEFAULT_MAX_ITER, DEFAULT_TOL, DIRECT_SOLVE_LIMIT, PROB_ATOL, RELATIVE_TIE_TOL,
    ActionSet, FiniteMdp, PolicyTable, QLipschitzReport, QTable, RewardTable,
    Selection, StabilityRadiusReport, ValueTable,
)

logger = logging.getLogger(__name__)

EVALUATION_TOL = 1e-12


def check_shape(values: np.ndarray, mdp: FiniteMdp, name: str) -> None:
    """Raise DimensionError unless values is an (n_states, n_actions) table."""
    if values.shape != mdp.shape:
        raise DimensionError(f"{name} has shape {values.shape}, MDP expects {mdp.shape}")


def default_tie_tolerance(row: np.ndarray) -> float:
    """Tie band for one Q row: 1e-9 scaled by the row magnitude (at least 1)."""
    return RELATIVE_TIE_TOL * max(1.0, float(np.max(np.abs(row))))


def sup_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if np.size(values) else 0.0


def bellman_backup(q: QTable, r: RewardTable, mdp: FiniteMdp) -> QTable:
    """
    Apply the Bellman optimality operator once.

    (T q)(s, a) = r(s, a) + gamma * sum_s' P(s'|s, a) * max_a' q(s', a')
    """
    check_shape(q.values, mdp, "Q table")
    check_shape(r.values, mdp, "Reward table")
    if mdp.discount == 0.0:
        return QTable(values=r.values)
    return QTable(values=r.values + mdp.discount * (mdp.transition @ q.state_values()))


def iterate_to_fixed_point(step, start: np.ndarray, discount: float, tol: float, max_iter: int, what: str) -> np.ndarray:
    """
    Iterate a gamma-contraction from start until the residual guarantees
    sup-norm distance tol to the fixed point.
    """
    if tol <= 0:
        raise ValueError("Tolerance must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")

    current = step(start)
    if discount == 0.0:
        return current

    threshold = tol * (1.0 - discount) / discount
    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        updated = step(current)
        residual = sup_norm(updated - current)
        current = updated
        if residual <= threshold:
            logger.debug(f"{what} converged after {iteration} iterations (residual={residual:.3e})")
            return current

    logger.warning(f"{what} did not converge in {max_iter} iterations (residual={residual:.3e})")
    raise NonConvergenceError(f"{what} did not converge", residual=residual, iterations=max_iter)


def solve_q_star(
    mdp: FiniteMdp,
    r: RewardTable,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> QTable:
    """
    Value iteration from the zero table.

    Stops once the residual rho satisfies rho <= tol * (1 - gamma) / gamma, so
    the returned table is within tol of Q*_r in sup-norm. With gamma = 0 a
    single backup is exact.

    Raises:
        NonConvergenceError: max_iter backups were not enough.
    """
    check_shape(r.values, mdp, "Reward table")
    rewards = r.values
    transition = mdp.transition
    gamma = mdp.discount

    def step(q: np.ndarray) -> np.ndarray:
        return rewards + gamma * (transition @ q.max(axis=1))

    values = iterate_to_fixed_point(step, np.zeros(mdp.shape), gamma, tol, max_iter, "Value iteration")
    return QTable(values=values)


def optimal_action_set(q: QTable, state: int, tie_tolerance: Optional[float] = None) -> ActionSet:
    """All actions within tie_tolerance of the row maximum, sorted ascending."""
    row = q.values[state]
    tol = default_tie_tolerance(row) if tie_tolerance is None else tie_tolerance
    best = row.max()
    actions = np.flatnonzero(row >= best - tol).tolist()
    return ActionSet(state=state, actions=actions, tie_tolerance=tol)


def greedy_policy(
    q: QTable,
    selection: Union[Selection, str] = Selection.LOWEST_INDEX,
    tie_tolerance: Optional[float] = None,
) -> PolicyTable:
    """
    Greedy policy supported on the optimal action sets of q.

    lowest_index / highest_index put a point mass on the smallest / largest
    tied action; uniform_over_ties spreads mass equally over the set.
    """
    selection = Selection(selection)
    n_states, n_actions = q.values.shape
    probs = np.zeros((n_states, n_actions))
    for s in range(n_states):
        tied = optimal_action_set(q, s, tie_tolerance).actions
        if selection == Selection.UNIFORM_OVER_TIES:
            probs[s, tied] = 1.0 / len(tied)
        elif selection == Selection.HIGHEST_INDEX:
            probs[s, tied[-1]] = 1.0
        else:
            probs[s, tied[0]] = 1.0
    return PolicyTable(probs=probs)


def _policy_transition(mdp: FiniteMdp, policy: PolicyTable) -> np.ndarray:
    """(SA x SA) matrix M[(s,a),(s',a')] = P(s'|s,a) * pi(a'|s')."""
    n = mdp.n_states * mdp.n_actions
    return (mdp.transition[:, :, :, None] * policy.probs[None, None, :, :]).reshape(n, n)


def policy_evaluation(mdp: FiniteMdp, policy: PolicyTable, r: RewardTable) -> Tuple[QTable, ValueTable]:
    """
    Exact Q^pi and V^pi for a fixed policy.

    Solves Q = r + gamma * M Q directly when the system has at most 4096
    unknowns, otherwise iterates to a residual of 1e-12.

    Raises:
        DimensionError: policy or reward shape does not match the MDP.
        NonConvergenceError: the iterative path hit its cap.
    """
    check_shape(r.values, mdp, "Reward table")
    check_shape(policy.probs, mdp, "Policy table")
    gamma = mdp.discount
    n = mdp.n_states * mdp.n_actions

    if gamma == 0.0:
        q_values = r.values.copy()
    elif n <= DIRECT_SOLVE_LIMIT:
        system = np.eye(n) - gamma * _policy_transition(mdp, policy)
        q_values = np.linalg.solve(system, r.values.reshape(n)).reshape(mdp.shape)
    else:
        probs = policy.probs
        rewards = r.values
        transition = mdp.transition

        def step(q: np.ndarray) -> np.ndarray:
            return rewards + gamma * (transition @ np.sum(probs * q, axis=1))

        q_values = iterate_to_fixed_point(
            step, np.zeros(mdp.shape), gamma, EVALUATION_TOL, DEFAULT_MAX_ITER, "Policy evaluation"
        )

    v_values = np.sum(policy.probs * q_values, axis=1)
    return QTable(values=q_values), ValueTable(values=v_values)


def q_lipschitz_report(
    mdp: FiniteMdp,
    r1: RewardTable,
    r2: RewardTable,
    reward_distance: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> QLipschitzReport:
    """
    Compare sup|Q*_r1 - Q*_r2| with sup|r1 - r2| / (1 - gamma).

    reward_distance replaces sup|r1 - r2| when the rewards come from a larger
    space with its own norm.
    """
    q1 = solve_q_star(mdp, r1, tol=tol)
    q2 = solve_q_star(mdp, r2, tol=tol)
    lhs = sup_norm(q1.values - q2.values)
    reward_gap = sup_norm(r1.values - r2.values) if reward_distance is None else float(reward_distance)
    rhs = reward_gap / (1.0 - mdp.discount)
    return QLipschitzReport(
        lhs=lhs,
        rhs=rhs,
        ratio=lhs / rhs if rhs > 0 else 0.0,
        lipschitz_estimate=lhs / reward_gap if reward_gap > 0 else 0.0,
        holds=bool(lhs <= rhs + 1e-8),
    )


def stability_radius_report(
    mdp: FiniteMdp,
    r: RewardTable,
    tie_tolerance: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> StabilityRadiusReport:
    """
    Continuity under uniqueness, made quantitative.

    If every state has a unique optimal action with gap g_s over the runner-up,
    a perturbation of sup-norm below (1 - gamma) * min_s g_s / 2 moves Q* by
    less than min_s g_s / 2 and cannot change any argmax.
    """
    q = solve_q_star(mdp, r, tol=tol)
    degenerate = []
    gaps = []
    for s in range(mdp.n_states):
        tied = optimal_action_set(q, s, tie_tolerance)
        if not tied.is_singleton:
            degenerate.append(s)
            continue
        if mdp.n_actions > 1:
            row = np.sort(q.values[s])
            gaps.append(float(row[-1] - row[-2]))

    if degenerate:
        return StabilityRadiusReport(min_gap=0.0, radius=0.0, unique=False, degenerate_states=degenerate)
    if not gaps:
        # Single-action MDP: the policy map is constant.
        return StabilityRadiusReport(min_gap=float("inf"), radius=float("inf"), unique=True)

    min_gap = min(gaps)
    return StabilityRadiusReport(
        min_gap=min_gap,
        radius=(1.0 - mdp.discount) * min_gap / 2.0,
        unique=True,
    )


def as_distribution(values, size: Optional[int] = None, name: str = "distribution") -> np.ndarray:
    """Validate a probability vector (nonnegative, sums to 1) and return it as an array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ArgumentError(f"{name} must be a non-empty 1-d vector")
    if size is not None and arr.size != size:
        raise ArgumentError(f"{name} has {arr.size} entries, expected {size}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ArgumentError(f"{name} must have finite nonnegative entries")
    if abs(arr.sum() - 1.0) > PROB_ATOL:
        raise ArgumentError(f"{name} sums to {arr.sum():.12g}, not 1")
    return arr
