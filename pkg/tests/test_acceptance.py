"""
End-to-end acceptance checks: exact finite-MDP reproductions of the
constructive claims plus the large random property suites.
"""
import numpy as np
import pytest

from conftest import A1, A2, S0, make_twopath, twopath_reward
from harness.cli import EXIT_PASSED, main
from harness.loader import list_builtins, load_builtin
from harness.report import render_report
from harness.runner import run_experiment
from incomplete.certificate import slacker_certificate
from mdp.models import RewardTable, Selection
from mdp.oracle import (
    brute_force_optimal_policies, brute_force_optimal_value, brute_force_q_star, random_mdp, random_reward,
)
from mdp.solver import greedy_policy, policy_evaluation, q_lipschitz_report, solve_q_star
from multi_reward.aggregation import (
    constant_weights, effective_lipschitz_report, multi_discontinuity_sequence, uniform_weights,
)
from multi_reward.models import RewardTuple, WeightTable
from perturbation.constructions import discontinuity_sequence, tie_breaker_report
from perturbation.distances import max_state_tv
from soft.solver import boltzmann_policy, solve_soft_q
from soft.stability import soft_policy_stability_report, softmax_l1_bound_report


def test_discontinuity_reproduction(twopath, tied_reward):
    """An eps-small reward change flips the optimal set and jumps the policy by 1/2."""
    for eps in (1e-1, 1e-3, 1e-6):
        cert = discontinuity_sequence(twopath, tied_reward, S0, A2, eps)
        assert cert.reward_distance <= eps * (1 + twopath.discount) + 1e-12
        assert cert.switched_action_set.actions == [A2]
        assert abs(cert.target_gap - eps) <= 1e-9
        assert cert.tv_jump == 0.5


def test_q_lipschitz_suite(rng):
    """sup|Q*_1 - Q*_2| / sup|r1 - r2| never exceeds 1 / (1 - gamma)."""
    for _ in range(1000):
        gamma = float(rng.choice([0.5, 0.9, 0.99]))
        mdp = random_mdp(rng, int(rng.integers(1, 7)), int(rng.integers(1, 5)), gamma)
        r1 = random_reward(rng, mdp)
        r2 = RewardTable(values=r1.values + rng.uniform(-0.5, 0.5, size=mdp.shape))
        report = q_lipschitz_report(mdp, r1, r2)
        assert report.holds
        assert report.lhs <= report.rhs + 1e-8

    for gamma in (0.5, 0.9, 0.99):
        mdp = random_mdp(rng, 3, 2, gamma)
        r = random_reward(rng, mdp)
        assert q_lipschitz_report(mdp, r, r.shift(0.25)).ratio == pytest.approx(1.0, abs=1e-9)


def test_oracle_equivalence(rng):
    """Value iteration agrees with policy enumeration on small instances."""
    for _ in range(500):
        n_states = int(rng.integers(1, 7))
        n_actions = int(rng.integers(1, 4))
        while n_actions ** n_states > 10 ** 4:
            n_states -= 1
        mdp = random_mdp(rng, n_states, n_actions, float(rng.choice([0.0, 0.5, 0.9, 0.99])), sparsity=0.3)
        r = random_reward(rng, mdp)
        gap = np.max(np.abs(solve_q_star(mdp, r).values - brute_force_q_star(mdp, r).values))
        assert gap <= 1e-8


@pytest.mark.parametrize("gamma", [0.5, 0.9])
@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_tie_breaker_gap(gamma, eps):
    """The promoted action wins by exactly eps / (1 + gamma)."""
    report = tie_breaker_report(make_twopath(gamma), twopath_reward(), S0, A1, A2, eps)
    assert abs(report.gap - eps / (1 + gamma)) <= 1e-8
    assert report.promoted_unique


@pytest.mark.parametrize("name", ["grader", "twopath_slacker"])
def test_slacker_certificates(name):
    """All three conditions hold, the gap is positive and matches enumeration; the control gap is zero."""
    scenario = load_builtin(name)
    mdp = scenario.build_mdp()
    r_train = scenario.build_reward(scenario.experiment.train_reward)
    r_missing = scenario.build_reward(scenario.experiment.missing_reward)
    mu = scenario.initial_distribution(scenario.experiment.initial_distribution)

    cert = slacker_certificate(mdp, r_train, r_missing, mu)
    assert cert.conditions_met.all_met
    assert cert.true_value_gap > 0

    pi_train = greedy_policy(solve_q_star(mdp, r_train), Selection.LOWEST_INDEX)
    _, v_train = policy_evaluation(mdp, pi_train, r_train + r_missing)
    oracle_gap = brute_force_optimal_value(mdp, r_train + r_missing, mu) - float(mu @ v_train.values)
    assert abs(cert.true_value_gap - oracle_gap) <= 1e-9

    control = slacker_certificate(mdp, r_train, RewardTable.zeros(mdp), mu)
    assert control.true_value_gap == 0.0


def test_softmax_lemma(rng):
    """L1 distance of softmax rows is at most the L-inf distance over alpha, and nearly tight at p = 1/2."""
    for alpha in (0.1, 1.0, 10.0):
        for _ in range(1000):
            n = int(rng.integers(2, 10))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            report = softmax_l1_bound_report(x, y, alpha)
            assert report.l1 <= report.bound + 1e-10
        t = 1e-3 * alpha
        assert softmax_l1_bound_report([t, -t], [-t, t], alpha).ratio >= 0.99


def test_soft_policy_stability_suite(rng):
    """Boltzmann policies move at most sup|r1 - r2| / (2 alpha (1 - gamma)) in TV."""
    for alpha in (0.1, 1.0):
        for _ in range(1000):
            mdp = random_mdp(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)), float(rng.choice([0.5, 0.9])))
            r1 = random_reward(rng, mdp)
            r2 = RewardTable(values=r1.values + rng.uniform(-0.3, 0.3, size=mdp.shape))
            report = soft_policy_stability_report(mdp, r1, r2, alpha)
            assert report.max_tv <= report.bound + 1e-8


def test_soft_policy_restores_continuity(twopath, tied_reward):
    """Along the discontinuity sequence the hard jump stays at 1/2 while the soft TV shrinks linearly."""
    alpha = 1.0
    base = boltzmann_policy(solve_soft_q(twopath, tied_reward, alpha))
    tvs = []
    for eps in (1e-1, 1e-2, 1e-3):
        cert = discontinuity_sequence(twopath, tied_reward, S0, A2, eps)
        assert cert.tv_jump == 0.5
        soft = boltzmann_policy(solve_soft_q(twopath, cert.perturbed_reward, alpha))
        tv = max_state_tv(base, soft)
        assert tv <= cert.reward_distance / (2 * alpha * (1 - twopath.discount)) + 1e-8
        tvs.append(tv)
    assert tvs[0] > tvs[1] > tvs[2] > 0
    assert tvs[2] / tvs[1] == pytest.approx(0.1, rel=0.05)


def test_effective_reward_lipschitz(rng):
    """The aggregation is 1-Lipschitz, with equality when the weight concentrates on the perturbed component."""
    for _ in range(1000):
        mdp = random_mdp(rng, 3, 2, 0.9)
        n = int(rng.integers(1, 4))
        weights = WeightTable(weights=rng.dirichlet(np.ones(n), size=3))
        t1 = RewardTuple(components=[random_reward(rng, mdp) for _ in range(n)])
        t2 = RewardTuple(components=[random_reward(rng, mdp) for _ in range(n)])
        assert effective_lipschitz_report(t1, t2, weights).holds

    mdp = random_mdp(rng, 3, 2, 0.9)
    t1 = RewardTuple(components=[random_reward(rng, mdp), random_reward(rng, mdp)])
    t2 = RewardTuple(components=[t1.components[0], t1.components[1].shift(-0.7)])
    report = effective_lipschitz_report(t1, t2, constant_weights(mdp, [0.0, 1.0]))
    assert abs(report.lhs - report.rhs) <= 1e-12


def test_multi_reward_discontinuity():
    """The mixture2 tuple flips with a valid certificate; N = 1 matches the single-reward path."""
    scenario = load_builtin("mixture2")
    mdp = scenario.build_mdp()
    for eps in scenario.experiment.epsilons:
        cert = multi_discontinuity_sequence(mdp, scenario.build_tuple(), scenario.build_weights(), S0, A2, eps)
        assert cert.valid
        assert cert.tv_jump == 0.5

    twopath = make_twopath()
    single = discontinuity_sequence(twopath, twopath_reward(), S0, A2, 1e-3)
    multi = multi_discontinuity_sequence(
        twopath, RewardTuple(components=[twopath_reward()]), uniform_weights(twopath, 1), S0, A2, 1e-3
    )
    assert np.array_equal(multi.perturbed_tuple.components[0].values, single.perturbed_reward.values)
    assert multi.tuple_distance == single.reward_distance


def test_length_penalty_breaks_the_tie():
    """Correctness alone ties short and long answers; the length penalty leaves only the short path."""
    scenario = load_builtin("lcpo_chain")
    mdp = scenario.build_mdp()
    prompt = scenario.mdp.state_index("prompt")
    short = scenario.mdp.action_index("short")
    correctness = scenario.build_reward("correctness")
    length_penalty = scenario.build_reward("length_penalty")
    penalized = correctness + length_penalty

    # 1[correct] - 0.0003 * |3 - n| for the 7-, 3- and 1-token answers
    for action, n_tokens, correct in (("long", 7, 1.0), ("short", 3, 1.0), ("guess", 1, 0.0)):
        a = scenario.mdp.action_index(action)
        assert correctness.values[prompt, a] == correct
        assert length_penalty.values[prompt, a] == pytest.approx(-0.0003 * abs(3 - n_tokens))

    assert brute_force_optimal_policies(mdp, correctness, prompt) == [0, 1]
    assert brute_force_optimal_policies(mdp, penalized, prompt) == [short]


def test_all_builtins_pass(capsys):
    """Every built-in scenario runs end to end with exit code 0 and replays identically."""
    for name in list_builtins():
        assert main(["run", "--builtin", name]) == EXIT_PASSED, name
        capsys.readouterr()

        scenario = load_builtin(name)
        assert render_report(run_experiment(scenario)) == render_report(run_experiment(scenario))
