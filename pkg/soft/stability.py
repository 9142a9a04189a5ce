"""
Numerical checks of the Lipschitz bounds that entropy regularization restores.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import softmax

from mdp.errors import ArgumentError
from mdp.models import DEFAULT_TOL, FiniteMdp, RewardTable
from mdp.solver import check_shape, solve_q_star, sup_norm
from perturbation.distances import max_state_tv

from .models import SoftHardGapReport, SoftmaxBoundReport, SoftStabilityReport, Temperature
from .solver import boltzmann_policy, solve_soft_q

logger = logging.getLogger(__name__)


def softmax_l1_bound_report(
    x: Sequence[float],
    y: Sequence[float],
    alpha: Union[Temperature, float],
) -> SoftmaxBoundReport:
    """
    Compare sum|softmax(x/alpha) - softmax(y/alpha)| with max|x - y| / alpha.

    Raises:
        ArgumentError: x and y differ in length or are not 1-d.
    """
    a = Temperature.of(alpha).alpha
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if x_arr.ndim != 1 or x_arr.shape != y_arr.shape:
        raise ArgumentError(f"Vectors must be 1-d of equal length, got {x_arr.shape} and {y_arr.shape}")

    l1 = float(np.abs(softmax(x_arr / a) - softmax(y_arr / a)).sum())
    bound = float(np.max(np.abs(x_arr - y_arr))) / a if x_arr.size else 0.0
    return SoftmaxBoundReport(
        l1=l1,
        bound=bound,
        ratio=l1 / bound if bound > 0 else 0.0,
        holds=bool(l1 <= bound + 1e-10),
    )


def soft_policy_stability_report(
    mdp: FiniteMdp,
    r1: RewardTable,
    r2: RewardTable,
    alpha: Union[Temperature, float],
    reward_distance: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> SoftStabilityReport:
    """
    Largest per-state TV between the two Boltzmann optimal policies against
    sup|r1 - r2| / (2 alpha (1 - gamma)).

    reward_distance overrides the sup-norm on the right-hand side; multi-reward
    callers pass the tuple max-norm.
    """
    temperature = Temperature.of(alpha)
    check_shape(r1.values, mdp, "Reward table")
    check_shape(r2.values, mdp, "Reward table")
    if reward_distance is None:
        reward_distance = sup_norm(r1.values - r2.values)
    reward_distance = float(reward_distance)

    pi1 = boltzmann_policy(solve_soft_q(mdp, r1, temperature, tol=tol))
    pi2 = boltzmann_policy(solve_soft_q(mdp, r2, temperature, tol=tol))
    max_tv = max_state_tv(pi1, pi2)
    bound = reward_distance / (2.0 * temperature.alpha * (1.0 - mdp.discount))
    holds = bool(max_tv <= bound + 1e-8)
    if not holds:
        logger.warning(f"Soft stability bound violated: tv={max_tv:.6g} > bound={bound:.6g} (alpha={temperature.alpha:g})")
    return SoftStabilityReport(
        max_tv=max_tv,
        bound=bound,
        reward_distance=reward_distance,
        alpha=temperature.alpha,
        holds=holds,
    )


def soft_hard_gap_report(
    mdp: FiniteMdp,
    r: RewardTable,
    alpha: Union[Temperature, float],
    tol: float = DEFAULT_TOL,
) -> SoftHardGapReport:
    """sup|Q*_soft - Q*| against alpha * log(n_actions) / (1 - gamma)."""
    temperature = Temperature.of(alpha)
    soft_q = solve_soft_q(mdp, r, temperature, tol=tol)
    hard_q = solve_q_star(mdp, r, tol=tol)
    gap = sup_norm(soft_q.values - hard_q.values)
    bound = float(temperature.alpha * np.log(mdp.n_actions) / (1.0 - mdp.discount))
    return SoftHardGapReport(
        alpha=temperature.alpha,
        gap=gap,
        bound=bound,
        holds=bool(gap <= bound + 2 * tol + 1e-10),
    )
