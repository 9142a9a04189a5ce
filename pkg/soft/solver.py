"""
Soft Bellman operator, soft value iteration and Boltzmann policies.

Every log-sum-exp and softmax goes through scipy.special, which shifts by the
row maximum before exponentiating.
"""
from typing import Union

import numpy as np
from scipy.special import logsumexp, softmax

from mdp.models import DEFAULT_MAX_ITER, DEFAULT_TOL, FiniteMdp, PolicyTable, RewardTable
from mdp.solver import iterate_to_fixed_point, check_shape

from .models import SoftQTable, Temperature


def soft_value(q: SoftQTable) -> np.ndarray:
    """alpha * log sum_a exp(q(s, a) / alpha) for every state."""
    alpha = q.alpha.alpha
    return alpha * logsumexp(q.values / alpha, axis=1)


def soft_bellman_backup(q: SoftQTable, r: RewardTable, mdp: FiniteMdp) -> SoftQTable:
    """(T q)(s, a) = r(s, a) + gamma * E_{s'}[alpha * logsumexp(q(s', .) / alpha)]."""
    check_shape(q.values, mdp, "Soft Q table")
    check_shape(r.values, mdp, "Reward table")
    if mdp.discount == 0.0:
        return SoftQTable(values=r.values, alpha=q.alpha)
    values = r.values + mdp.discount * (mdp.transition @ soft_value(q))
    return SoftQTable(values=values, alpha=q.alpha)


def solve_soft_q(
    mdp: FiniteMdp,
    r: RewardTable,
    alpha: Union[Temperature, float],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SoftQTable:
    """
    Soft value iteration with the same residual stopping rule as solve_q_star.

    Raises:
        NonConvergenceError: max_iter backups were not enough.
    """
    check_shape(r.values, mdp, "Reward table")
    temperature = Temperature.of(alpha)
    a = temperature.alpha
    rewards = r.values
    transition = mdp.transition
    gamma = mdp.discount

    def step(q: np.ndarray) -> np.ndarray:
        return rewards + gamma * (transition @ (a * logsumexp(q / a, axis=1)))

    values = iterate_to_fixed_point(step, np.zeros(mdp.shape), gamma, tol, max_iter, "Soft value iteration")
    return SoftQTable(values=values, alpha=temperature)


def boltzmann_policy(q: SoftQTable) -> PolicyTable:
    """pi(a|s) proportional to exp(q(s, a) / alpha)."""
    probs = softmax(q.values / q.alpha.alpha, axis=1)
    # renormalize so every row sums to 1 to within round-off
    return PolicyTable(probs=probs / probs.sum(axis=1, keepdims=True))
