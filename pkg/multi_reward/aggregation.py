"""
Effective reward, mixture objective and tuple-level continuity and discontinuity.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np

from mdp.errors import ArgumentError, DimensionError
from mdp.models import (
    DEFAULT_TOL, FiniteMdp, PolicyTable, QLipschitzReport, RewardTable, Selection, StabilityRadiusReport,
)
from mdp.solver import (
    check_shape, policy_evaluation, q_lipschitz_report, solve_q_star, stability_radius_report, sup_norm,
)
from perturbation.constructions import bumped_reward_delta, require_tied_set, verify_switch
from soft.models import SoftStabilityReport, Temperature
from soft.stability import soft_policy_stability_report

from .models import (
    EffectiveLipschitzReport, MixtureSpec, MultiDiscontinuityCertificate, RewardTuple, WeightTable,
)

logger = logging.getLogger(__name__)


def _check_weights(tuple_: RewardTuple, weights: WeightTable) -> None:
    n_states = tuple_.components[0].values.shape[0]
    if weights.weights.shape != (n_states, tuple_.size):
        raise DimensionError(
            f"Weight table has shape {weights.weights.shape}, expected ({n_states}, {tuple_.size})"
        )


def effective_reward(tuple_: RewardTuple, weights: WeightTable) -> RewardTable:
    """R_eff(s, a) = sum_k w_k(s) * R_k(s, a)."""
    _check_weights(tuple_, weights)
    return RewardTable(values=np.einsum("sk,ksa->sa", weights.weights, tuple_.stacked))


def tuple_distance(t1: RewardTuple, t2: RewardTuple) -> float:
    """max_k sup|R1_k - R2_k|."""
    return (t1 - t2).tuple_norm


def effective_lipschitz_report(t1: RewardTuple, t2: RewardTuple, weights: WeightTable) -> EffectiveLipschitzReport:
    """The effective-reward map is 1-Lipschitz from the tuple norm to the sup-norm."""
    if t1.size != t2.size:
        raise DimensionError(f"Tuples have {t1.size} and {t2.size} components")
    lhs = sup_norm(effective_reward(t1, weights).values - effective_reward(t2, weights).values)
    rhs = tuple_distance(t1, t2)
    return EffectiveLipschitzReport(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + 1e-12))


def effective_q_lipschitz_report(
    mdp: FiniteMdp,
    t1: RewardTuple,
    t2: RewardTuple,
    weights: WeightTable,
    tol: float = DEFAULT_TOL,
) -> QLipschitzReport:
    """sup|Q*_eff(t1) - Q*_eff(t2)| against ||t1 - t2|| / (1 - gamma), the tuple norm on the right."""
    if t1.size != t2.size:
        raise DimensionError(f"Tuples have {t1.size} and {t2.size} components")
    return q_lipschitz_report(
        mdp,
        effective_reward(t1, weights),
        effective_reward(t2, weights),
        reward_distance=tuple_distance(t1, t2),
        tol=tol,
    )


def effective_stability_radius_report(
    mdp: FiniteMdp,
    tuple_: RewardTuple,
    weights: WeightTable,
    tie_tolerance: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> StabilityRadiusReport:
    """
    Continuity under uniqueness for the effective model.

    The effective reward is 1-Lipschitz in the tuple norm, so the radius of
    R_eff bounds tuple perturbations too: any t2 with ||t2 - t1|| below it
    keeps every effective argmax.
    """
    for component in tuple_.components:
        check_shape(component.values, mdp, "Reward component")
    report = stability_radius_report(mdp, effective_reward(tuple_, weights), tie_tolerance, tol)
    if not report.unique:
        logger.info(f"Effective optimum is tied at states {report.degenerate_states}; radius is 0")
    return report


def mixture_objective(mdp: FiniteMdp, tuple_: RewardTuple, mix: MixtureSpec, policy: PolicyTable) -> float:
    """J(pi) = sum_k p_k * sum_s D_k(s) * V^pi_{R_k}(s), each V^pi solved exactly."""
    if mix.class_priors.size != tuple_.size:
        raise DimensionError(f"Mixture has {mix.class_priors.size} classes, tuple has {tuple_.size} components")
    if mix.initial_distributions.shape[1] != mdp.n_states:
        raise DimensionError(
            f"Initial distributions cover {mix.initial_distributions.shape[1]} states, MDP has {mdp.n_states}"
        )
    total = 0.0
    for prior, initial, component in zip(mix.class_priors, mix.initial_distributions, tuple_.components):
        _, v = policy_evaluation(mdp, policy, component)
        total += prior * float(initial @ v.values)
    return float(total)


def multi_discontinuity_sequence(
    mdp: FiniteMdp,
    tuple_: RewardTuple,
    weights: WeightTable,
    state: int,
    target: int,
    epsilon: float,
    tie_tolerance: Optional[float] = None,
    selection: Union[Selection, str] = Selection.UNIFORM_OVER_TIES,
    tol: float = DEFAULT_TOL,
) -> MultiDiscontinuityCertificate:
    """
    Perturb every component by the same delta so the effective optimal set
    at state collapses to {target}.

    delta = R_{Q*_eff + eps*bump} - R_{Q*_eff}. Because each weight row sums
    to 1, sum_k w_k(s) * delta(s, a) = delta(s, a).

    Raises:
        PreconditionError: the effective optimal set at state is a singleton or misses target.
        ArgumentError: epsilon is not positive.
    """
    if epsilon <= 0:
        raise ArgumentError(f"Epsilon must be positive, got {epsilon}")
    for component in tuple_.components:
        check_shape(component.values, mdp, "Reward component")
    selection = Selection(selection)

    r_eff = effective_reward(tuple_, weights)
    q0 = solve_q_star(mdp, r_eff, tol=tol)
    tied = require_tied_set(q0, state, [target], tie_tolerance)
    protected = [a for a in tied.actions if a != target]

    delta = bumped_reward_delta(mdp, q0, state, target, epsilon, protected)
    perturbed_tuple = tuple_.shift(delta)
    perturbed_eff = effective_reward(perturbed_tuple, weights)
    distributed = np.einsum("sk,sa->sa", weights.weights, delta)
    checks = verify_switch(mdp, q0, perturbed_eff, state, target, tied, selection, tie_tolerance, tol)

    certificate = MultiDiscontinuityCertificate(
        epsilon=epsilon,
        state=state,
        target=target,
        selection=selection,
        perturbed_tuple=perturbed_tuple,
        tuple_distance=tuple_distance(perturbed_tuple, tuple_),
        distance_bound=epsilon * (1.0 + mdp.discount),
        tied_actions=tied.actions,
        effective_identity_error=sup_norm(distributed - delta),
        **checks,
    )
    logger.debug(
        f"Tuple discontinuity at state {state}, eps={epsilon:g}, N={tuple_.size}: "
        f"distance={certificate.tuple_distance:.3e}, switched={certificate.switched_action_set.actions}"
    )
    return certificate


def tuple_soft_stability_report(
    mdp: FiniteMdp,
    t1: RewardTuple,
    t2: RewardTuple,
    weights: WeightTable,
    alpha: Union[Temperature, float],
    tol: float = DEFAULT_TOL,
) -> SoftStabilityReport:
    """Soft stability on the effective rewards, with the tuple norm on the right-hand side."""
    return soft_policy_stability_report(
        mdp,
        effective_reward(t1, weights),
        effective_reward(t2, weights),
        alpha,
        reward_distance=tuple_distance(t1, t2),
        tol=tol,
    )


def uniform_weights(mdp: FiniteMdp, n_components: int) -> WeightTable:
    if n_components < 1:
        raise ArgumentError("Need at least one component")
    return WeightTable(weights=np.full((mdp.n_states, n_components), 1.0 / n_components))


def constant_weights(mdp: FiniteMdp, priors: Sequence[float]) -> WeightTable:
    """Every state uses the same weights, typically the class priors."""
    return WeightTable(weights=np.tile(np.asarray(priors, dtype=float), (mdp.n_states, 1)))
