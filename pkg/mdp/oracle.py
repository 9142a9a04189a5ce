"""
Brute-force oracle and random instance generators for tests and cross-checks.
"""
import itertools
import logging
from typing import Sequence

import numpy as np

from .errors import InstanceTooLargeError
from .models import FiniteMdp, PolicyTable, QTable, RewardTable
from .solver import bellman_backup, check_shape

logger = logging.getLogger(__name__)

MAX_ENUMERATED_POLICIES = 100_000
_BATCH = 2048


def _deterministic_policies(mdp: FiniteMdp) -> np.ndarray:
    """Every deterministic stationary policy as a row of chosen actions."""
    count = mdp.n_actions ** mdp.n_states
    if count > MAX_ENUMERATED_POLICIES:
        raise InstanceTooLargeError(
            f"{mdp.n_actions}^{mdp.n_states} = {count} policies exceeds {MAX_ENUMERATED_POLICIES}"
        )
    return np.array(list(itertools.product(range(mdp.n_actions), repeat=mdp.n_states)), dtype=int)


def evaluate_deterministic_policies(mdp: FiniteMdp, r: RewardTable, choices: np.ndarray) -> np.ndarray:
    """
    Exact Q^pi for a batch of deterministic policies.

    Solves (I - gamma P_pi) V = r_pi for every policy at once and returns
    Q^pi = r + gamma P V^pi with shape (n_policies, n_states, n_actions).
    This is the policy_evaluation system restricted to point-mass rows.
    """
    check_shape(r.values, mdp, "Reward table")
    states = np.arange(mdp.n_states)
    gamma = mdp.discount
    p_pi = mdp.transition[states[None, :], choices]          # (K, S, S)
    r_pi = r.values[states[None, :], choices]                # (K, S)
    system = np.eye(mdp.n_states)[None, :, :] - gamma * p_pi
    v = np.linalg.solve(system, r_pi[..., None])[..., 0]     # (K, S)
    return r.values[None, :, :] + gamma * np.einsum("ijk,nk->nij", mdp.transition, v)


def brute_force_q_star(mdp: FiniteMdp, r: RewardTable) -> QTable:
    """
    Q* by enumerating every deterministic stationary policy.

    The pointwise maximum of Q^pi over deterministic policies is Q*, since a
    finite discounted MDP has a deterministic optimum; one backup refines it.
    Only meant as an independent oracle on small instances.

    Raises:
        InstanceTooLargeError: n_actions ** n_states > 100000.
    """
    policies = _deterministic_policies(mdp)
    best = np.full(mdp.shape, -np.inf)
    for start in range(0, len(policies), _BATCH):
        q_batch = evaluate_deterministic_policies(mdp, r, policies[start:start + _BATCH])
        best = np.maximum(best, q_batch.max(axis=0))
    logger.debug(f"Brute force enumerated {len(policies)} policies")
    return bellman_backup(QTable(values=best), r, mdp)


def brute_force_optimal_value(mdp: FiniteMdp, r: RewardTable, mu: Sequence[float]) -> float:
    """Best mu-weighted value over all deterministic policies."""
    policies = _deterministic_policies(mdp)
    weights = np.asarray(mu, dtype=float)
    best = -np.inf
    for start in range(0, len(policies), _BATCH):
        choices = policies[start:start + _BATCH]
        q_batch = evaluate_deterministic_policies(mdp, r, choices)
        v_batch = np.take_along_axis(q_batch, choices[:, :, None], axis=2)[..., 0]
        best = max(best, float(np.max(v_batch @ weights)))
    return best


def brute_force_optimal_policies(mdp: FiniteMdp, r: RewardTable, state: int, atol: float = 1e-9) -> list:
    """Actions taken at state by some deterministic policy that is optimal everywhere."""
    q_star = brute_force_q_star(mdp, r).values
    v_star = q_star.max(axis=1)
    actions = set()
    policies = _deterministic_policies(mdp)
    for start in range(0, len(policies), _BATCH):
        choices = policies[start:start + _BATCH]
        q_batch = evaluate_deterministic_policies(mdp, r, choices)
        v_batch = np.take_along_axis(q_batch, choices[:, :, None], axis=2)[..., 0]
        optimal = np.all(np.abs(v_batch - v_star[None, :]) <= atol, axis=1)
        actions.update(int(a) for a in choices[optimal, state])
    return sorted(actions)


def random_mdp(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    discount: float,
    sparsity: float = 0.0,
) -> FiniteMdp:
    """Random MDP with Dirichlet transition rows; sparsity zeroes a share of entries."""
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    if sparsity > 0:
        mask = rng.random(transition.shape) < sparsity
        # keep at least one successor per row
        keep = rng.integers(n_states, size=(n_states, n_actions))
        mask[np.arange(n_states)[:, None], np.arange(n_actions)[None, :], keep] = False
        transition = np.where(mask, 0.0, transition)
    transition = transition / transition.sum(axis=2, keepdims=True)
    return FiniteMdp.from_transition(transition, discount)


def random_reward(rng: np.random.Generator, mdp: FiniteMdp, scale: float = 1.0) -> RewardTable:
    return RewardTable(values=rng.uniform(-scale, scale, size=mdp.shape))


def random_policy(rng: np.random.Generator, mdp: FiniteMdp) -> PolicyTable:
    probs = rng.dirichlet(np.ones(mdp.n_actions), size=mdp.n_states)
    return PolicyTable(probs=probs / probs.sum(axis=1, keepdims=True))
