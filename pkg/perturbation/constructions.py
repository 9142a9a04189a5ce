"""
Reward perturbations that provably flip optimal actions.

The recipe: bump Q* at (state, target) by eps, map the bumped table back to
reward space with the inverse Bellman map, and check the result by solving
again. On a finite grid the bump is the indicator of the center pair.
"""
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from mdp.errors import ArgumentError, PreconditionError
from mdp.models import DEFAULT_TOL, ActionSet, FiniteMdp, QTable, RewardTable, Selection
from mdp.solver import check_shape, greedy_policy, optimal_action_set, solve_q_star, sup_norm

from .distances import tv_distance
from .models import BumpTable, DiscontinuityCertificate, TieBreakerReport

logger = logging.getLogger(__name__)


def make_bump(mdp: FiniteMdp, center: Tuple[int, int], protected: Sequence[int] = ()) -> BumpTable:
    """
    Indicator bump of the center pair.

    Every function on a finite grid is continuous, so the indicator is a valid
    bump: bounded in [0, 1], 1 at the center and 0 on the protected actions.

    Raises:
        ArgumentError: the center action is protected or out of range.
    """
    state, action = center
    if not (0 <= state < mdp.n_states and 0 <= action < mdp.n_actions):
        raise ArgumentError(f"Bump center {center} is outside the {mdp.shape} grid")
    if action in protected:
        raise ArgumentError(f"Bump center action {action} is listed as protected")
    values = np.zeros(mdp.shape)
    values[state, action] = 1.0
    return BumpTable(values=values, center=(state, action), protected=sorted(protected))


def inverse_bellman(q: QTable, mdp: FiniteMdp) -> RewardTable:
    """
    The reward whose optimal Q-function is q.

    R_q(s, a) = q(s, a) - gamma * sum_s' P(s'|s, a) * max_a' q(s', a'),
    so that T_{R_q}(q) = q holds exactly.
    """
    check_shape(q.values, mdp, "Q table")
    if mdp.discount == 0.0:
        return RewardTable(values=q.values)
    return RewardTable(values=q.values - mdp.discount * (mdp.transition @ q.state_values()))


def bumped_reward_delta(
    mdp: FiniteMdp,
    q0: QTable,
    state: int,
    target: int,
    height: float,
    protected: Sequence[int],
) -> np.ndarray:
    """
    Reward-space image of a Q-space bump of the given height.

    Returned as R_{q0 + height*bump} - R_{q0}, so adding it to r0 does not
    inherit the solver residual of q0.
    """
    bump = make_bump(mdp, (state, target), protected)
    bumped = QTable(values=q0.values + height * bump.values)
    return inverse_bellman(bumped, mdp).values - inverse_bellman(q0, mdp).values


def require_tied_set(q0: QTable, state: int, actions: Sequence[int], tie_tolerance: Optional[float]) -> ActionSet:
    tied = optimal_action_set(q0, state, tie_tolerance)
    if len(tied) < 2:
        raise PreconditionError(f"State {state} has a unique optimal action {tied.actions}; nothing to switch")
    missing = [a for a in actions if a not in tied]
    if missing:
        raise PreconditionError(f"Actions {missing} are not optimal at state {state} (optimal: {tied.actions})")
    return tied


def verify_switch(
    mdp: FiniteMdp,
    q0: QTable,
    perturbed: RewardTable,
    state: int,
    target: int,
    tied: ActionSet,
    selection: Selection,
    tie_tolerance: Optional[float],
    tol: float,
) -> dict:
    """Re-solve the perturbed reward and measure the switch at state."""
    q_new = solve_q_star(mdp, perturbed, tol=tol)
    switched = optimal_action_set(q_new, state, tie_tolerance)
    row = q_new.values[state]
    others = [a for a in tied.actions if a != target]
    target_gap = float(min(row[target] - row[a] for a in others))
    formerly_suboptimal = [a for a in range(mdp.n_actions) if a not in tied]
    suboptimal_preserved = all(a not in switched and row[a] < row[target] for a in formerly_suboptimal)

    before = greedy_policy(q0, selection, tie_tolerance).probs[state]
    after = greedy_policy(q_new, selection, tie_tolerance).probs[state]
    return {
        "switched_action_set": switched,
        "target_gap": target_gap,
        "suboptimal_preserved": suboptimal_preserved,
        "tv_jump": tv_distance(before, after),
    }


def discontinuity_sequence(
    mdp: FiniteMdp,
    r0: RewardTable,
    state: int,
    target: int,
    epsilon: float,
    tie_tolerance: Optional[float] = None,
    selection: Union[Selection, str] = Selection.UNIFORM_OVER_TIES,
    tol: float = DEFAULT_TOL,
) -> DiscontinuityCertificate:
    """
    Build r_eps with sup|r_eps - r0| <= eps(1 + gamma) whose optimal set at
    state is exactly {target}.

    Raises:
        PreconditionError: the optimal set at state is a singleton or misses target.
        ArgumentError: epsilon is not positive.
    """
    if epsilon <= 0:
        raise ArgumentError(f"Epsilon must be positive, got {epsilon}")
    check_shape(r0.values, mdp, "Reward table")
    selection = Selection(selection)

    q0 = solve_q_star(mdp, r0, tol=tol)
    tied = require_tied_set(q0, state, [target], tie_tolerance)
    protected = [a for a in tied.actions if a != target]

    delta = bumped_reward_delta(mdp, q0, state, target, epsilon, protected)
    perturbed = RewardTable(values=r0.values + delta)
    checks = verify_switch(mdp, q0, perturbed, state, target, tied, selection, tie_tolerance, tol)

    certificate = DiscontinuityCertificate(
        epsilon=epsilon,
        state=state,
        target=target,
        selection=selection,
        perturbed_reward=perturbed,
        reward_distance=sup_norm(perturbed.values - r0.values),
        distance_bound=epsilon * (1.0 + mdp.discount),
        tied_actions=tied.actions,
        **checks,
    )
    logger.debug(
        f"Discontinuity at state {state}, eps={epsilon:g}: distance={certificate.reward_distance:.3e}, "
        f"switched={certificate.switched_action_set.actions}, tv_jump={certificate.tv_jump:.3f}"
    )
    return certificate


def tie_breaker(
    mdp: FiniteMdp,
    r0: RewardTable,
    state: int,
    demoted: int,
    promoted: int,
    epsilon: float,
    tie_tolerance: Optional[float] = None,
    strict: bool = False,
    tol: float = DEFAULT_TOL,
) -> RewardTable:
    """
    Perturb r0 by at most epsilon so that promoted beats demoted at state.

    The Q-space bump has height epsilon / (1 + gamma), which is also the gap
    promoted gains over demoted. With strict=True, epsilon above half the
    smallest suboptimality gap at the state is rejected, so formerly
    suboptimal actions cannot be disturbed by round-off either.

    Raises:
        ArgumentError: demoted == promoted, or epsilon is not positive.
        PreconditionError: either action is not optimal at state, or the
            strict size limit is exceeded.
    """
    if demoted == promoted:
        raise ArgumentError("Demoted and promoted actions must differ")
    if epsilon <= 0:
        raise ArgumentError(f"Epsilon must be positive, got {epsilon}")
    check_shape(r0.values, mdp, "Reward table")

    q0 = solve_q_star(mdp, r0, tol=tol)
    tied = require_tied_set(q0, state, [demoted, promoted], tie_tolerance)

    if strict:
        row = q0.values[state]
        gaps = [row.max() - row[a] for a in range(mdp.n_actions) if a not in tied]
        if gaps and epsilon > min(gaps) / 2:
            raise PreconditionError(
                f"Epsilon {epsilon:g} exceeds half the smallest suboptimality gap {min(gaps):g} at state {state}"
            )

    height = epsilon / (1.0 + mdp.discount)
    protected = [a for a in tied.actions if a != promoted]
    delta = bumped_reward_delta(mdp, q0, state, promoted, height, protected)
    return RewardTable(values=r0.values + delta)


def tie_breaker_report(
    mdp: FiniteMdp,
    r0: RewardTable,
    state: int,
    demoted: int,
    promoted: int,
    epsilon: float,
    tie_tolerance: Optional[float] = None,
    strict: bool = False,
    tol: float = DEFAULT_TOL,
) -> TieBreakerReport:
    """Run tie_breaker and measure the resulting gap and uniqueness."""
    reward = tie_breaker(mdp, r0, state, demoted, promoted, epsilon, tie_tolerance, strict, tol)
    q_new = solve_q_star(mdp, reward, tol=tol)
    optimal = optimal_action_set(q_new, state, tie_tolerance)
    return TieBreakerReport(
        epsilon=epsilon,
        state=state,
        demoted=demoted,
        promoted=promoted,
        reward=reward,
        reward_distance=sup_norm(reward.values - r0.values),
        gap=float(q_new.values[state, promoted] - q_new.values[state, demoted]),
        expected_gap=epsilon / (1.0 + mdp.discount),
        promoted_unique=optimal.actions == [promoted],
        optimal_actions=optimal.actions,
    )


def epsilon_sequence(start: float, ratio: float, count: int) -> List[float]:
    """Geometric sequence start, start*ratio, ... used to drive eps -> 0."""
    return [start * ratio ** k for k in range(count)]
