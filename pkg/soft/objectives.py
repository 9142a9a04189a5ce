"""
Regularized objectives evaluated exactly for a fixed policy.
"""
from typing import Sequence, Union

import numpy as np

from mdp.errors import ArgumentError, SupportViolationError
from mdp.models import FiniteMdp, PolicyTable, RewardTable
from mdp.solver import as_distribution, check_shape, policy_evaluation

from .models import Temperature


def _augmented_value(mdp: FiniteMdp, r: RewardTable, policy: PolicyTable, penalty: np.ndarray, mu) -> float:
    initial = as_distribution(mu, mdp.n_states, "Initial distribution")
    _, v = policy_evaluation(mdp, policy, RewardTable(values=r.values - penalty))
    return float(initial @ v.values)


def kl_objective(
    mdp: FiniteMdp,
    r: RewardTable,
    policy: PolicyTable,
    base: PolicyTable,
    beta: float,
    mu: Sequence[float],
) -> float:
    """
    J(pi) = E[sum_t gamma^t (r - beta * KL(pi(.|s_t) || base(.|s_t)))], averaged over mu.

    Evaluated as V^pi of the augmented reward r(s, a) - beta * log(pi(a|s) / base(a|s)),
    with the convention 0 * log 0 = 0 where pi puts no mass.

    Raises:
        SupportViolationError: base has zero mass where pi has mass.
        ArgumentError: beta is negative or mu is not a distribution.
    """
    if beta < 0:
        raise ArgumentError(f"beta must be nonnegative, got {beta}")
    check_shape(r.values, mdp, "Reward table")
    check_shape(policy.probs, mdp, "Policy table")
    check_shape(base.probs, mdp, "Base policy table")

    support = policy.probs > 0
    violations = np.argwhere(support & (base.probs <= 0))
    if violations.size:
        s, a = (int(i) for i in violations[0])
        raise SupportViolationError(
            f"Base policy has zero mass at ({mdp.state_name(s)}, {mdp.action_name(a)}) "
            f"where the policy has mass {policy.probs[s, a]:g}; KL is infinite"
        )

    log_ratio = np.zeros(mdp.shape)
    log_ratio[support] = np.log(policy.probs[support]) - np.log(base.probs[support])
    return _augmented_value(mdp, r, policy, beta * log_ratio, mu)


def entropy_objective(
    mdp: FiniteMdp,
    r: RewardTable,
    policy: PolicyTable,
    alpha: Union[Temperature, float],
    mu: Sequence[float],
) -> float:
    """Entropy-regularized return E[sum_t gamma^t (r + alpha * H(pi(.|s_t)))], averaged over mu."""
    a = Temperature.of(alpha).alpha
    check_shape(r.values, mdp, "Reward table")
    check_shape(policy.probs, mdp, "Policy table")
    support = policy.probs > 0
    log_pi = np.zeros(mdp.shape)
    log_pi[support] = np.log(policy.probs[support])
    return _augmented_value(mdp, r, policy, a * log_pi, mu)
