"""
Experiment runner: turns a validated scenario into an ExperimentReport.

Each sweep is a list of independent jobs. Jobs run on a thread pool and their
records are collected in grid order, so a report depends only on the scenario
and the seed.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from incomplete.certificate import slacker_certificate
from mdp.errors import LabError
from mdp.models import FiniteMdp, PolicyTable, RewardTable, Selection
from mdp.oracle import brute_force_optimal_policies, brute_force_optimal_value
from mdp.solver import greedy_policy, policy_evaluation, solve_q_star
from multi_reward.aggregation import (
    constant_weights, effective_lipschitz_report, effective_reward, mixture_objective,
    multi_discontinuity_sequence,
)
from multi_reward.models import MixtureSpec, RewardTuple
from perturbation.constructions import discontinuity_sequence, tie_breaker_report
from soft.stability import soft_policy_stability_report

from .config import TOOL_VERSION, LabSettings
from .models import (
    DiscontinuitySweep, ExperimentReport, MixturePerturbation, RunRecord, ScenarioFile, SlackerCheck,
    SoftStabilitySweep, TieBreakerSweep,
)

logger = logging.getLogger(__name__)

Job = Callable[[], List[Dict[str, Any]]]

GAP_ATOL = 1e-9
ORACLE_ATOL = 1e-9
EXACT_ATOL = 1e-12


def expected_tv_jump(selection: Selection, tied: List[int], target: int) -> float:
    """TV between the greedy row over the tied set and the point mass on target."""
    if selection == Selection.UNIFORM_OVER_TIES:
        return (len(tied) - 1) / len(tied)
    chosen = tied[0] if selection == Selection.LOWEST_INDEX else tied[-1]
    return 0.0 if chosen == target else 1.0


def _all(records: List[RunRecord], predicate: Callable[[RunRecord], bool], kind: Optional[str] = None) -> bool:
    selected = [r for r in records if not r.failed and (kind is None or r.details.get("kind") == kind)]
    return bool(selected) and all(predicate(r) for r in selected)


class ExperimentRunner:
    """Runs the experiment block of a scenario."""

    def __init__(self, settings: Optional[LabSettings] = None):
        self.settings = settings or LabSettings.from_env()
        self._dispatch = {
            "discontinuity_sweep": self._discontinuity_sweep,
            "tie_breaker_sweep": self._tie_breaker_sweep,
            "soft_stability_sweep": self._soft_stability_sweep,
            "slacker_check": self._slacker_check,
            "mixture_perturbation": self._mixture_perturbation,
        }

    def run(self, scenario: ScenarioFile, seed: Optional[int] = None, timing: bool = False) -> ExperimentReport:
        """
        Execute the scenario's experiment and compare verdicts with its expected block.

        Args:
            scenario: Validated scenario
            seed: Overrides the scenario seed for randomized trials
            timing: Fill wall_clock_seconds (breaks byte-identical replays)

        Returns:
            ExperimentReport with per-run records and verdicts
        """
        seed = scenario.seed if seed is None else seed
        started = time.perf_counter()
        exp = scenario.experiment
        logger.info(f"Running {exp.kind} for scenario {scenario.id} (seed={seed})")

        jobs, evaluate = self._dispatch[exp.kind](scenario, np.random.default_rng(seed))
        records = self._execute(jobs)
        verdicts = evaluate(records)
        failures = sum(1 for r in records if r.failed)
        verdicts["no_run_failures"] = failures == 0

        expected = {name: scenario.expected.get(name, True) for name in verdicts}
        passed = all(verdicts[name] == expected[name] for name in verdicts)
        report = ExperimentReport(
            scenario_id=scenario.id,
            description=scenario.description,
            experiment=exp.kind,
            seed=seed,
            records=records,
            verdicts=verdicts,
            expected=expected,
            passed=passed,
            run_failures=failures,
            tool_version=TOOL_VERSION,
            wall_clock_seconds=time.perf_counter() - started if timing else None,
        )
        if passed:
            logger.info(f"Scenario {scenario.id} passed ({len(records)} runs)")
        else:
            logger.warning(f"Scenario {scenario.id} failed verdicts: {report.mismatches}")
        return report

    def _execute(self, jobs: List[tuple]) -> List[RunRecord]:
        """Run (parameters, job) pairs concurrently; records keep grid order."""

        def guarded(item):
            parameters, job = item
            try:
                return job()
            except (LabError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
                logger.warning(f"Run {parameters} failed: {exc}")
                return [{
                    "sweep_parameter": parameters.get("sweep_parameter", "run"),
                    "sweep_value": parameters.get("sweep_value"),
                    "parameters": parameters,
                    "failed": True,
                    "error": f"{type(exc).__name__}: {exc}",
                }]

        with ThreadPoolExecutor(max_workers=self.settings.max_workers) as pool:
            results = list(pool.map(guarded, jobs))

        records = []
        for rows in results:
            for row in rows:
                records.append(RunRecord(index=len(records), **row))
        return records

    # Discontinuity sweep

    def _discontinuity_sweep(self, scenario: ScenarioFile, rng: np.random.Generator):
        exp: DiscontinuitySweep = scenario.experiment
        mdp = scenario.build_mdp()
        r0 = scenario.build_reward(exp.reward)
        state = scenario.mdp.state_index(exp.state)
        target = scenario.mdp.action_index(exp.target)

        def job(eps: float) -> List[Dict[str, Any]]:
            cert = discontinuity_sequence(mdp, r0, state, target, eps, exp.tie_tolerance, exp.selection)
            rows = [_certificate_row(eps, cert.reward_distance, cert, exp.selection)]
            for alpha in exp.alphas:
                rows.append(_soft_row(mdp, r0, cert.perturbed_reward, alpha, eps))
            return rows

        jobs = [({"sweep_parameter": "epsilon", "sweep_value": eps}, (lambda e=eps: job(e))) for eps in exp.epsilons]

        def evaluate(records: List[RunRecord]) -> Dict[str, bool]:
            verdicts = _hard_verdicts(records)
            verdicts["gap_equals_epsilon"] = _all(
                records, lambda r: abs(r.details["target_gap"] - r.sweep_value) <= GAP_ATOL, "hard"
            )
            verdicts["suboptimal_preserved"] = _all(records, lambda r: r.details["suboptimal_preserved"], "hard")
            if exp.alphas:
                verdicts["soft_bound_holds"] = _all(records, lambda r: r.holds, "soft")
            return verdicts

        return jobs, evaluate

    # Tie-breaker sweep

    def _tie_breaker_sweep(self, scenario: ScenarioFile, rng: np.random.Generator):
        exp: TieBreakerSweep = scenario.experiment
        mdp = scenario.build_mdp()
        r0 = scenario.build_reward(exp.reward)
        state = scenario.mdp.state_index(exp.state)
        demoted = scenario.mdp.action_index(exp.demoted)
        promoted = scenario.mdp.action_index(exp.promoted)

        def job(eps: float) -> List[Dict[str, Any]]:
            report = tie_breaker_report(mdp, r0, state, demoted, promoted, eps, exp.tie_tolerance, exp.strict)
            return [{
                "sweep_parameter": "epsilon",
                "sweep_value": eps,
                "parameters": {"state": state, "demoted": demoted, "promoted": promoted, "strict": exp.strict},
                "lhs": report.reward_distance,
                "rhs": eps,
                "holds": report.reward_distance <= eps + EXACT_ATOL,
                "details": {
                    "kind": "tie_breaker",
                    "gap": report.gap,
                    "expected_gap": report.expected_gap,
                    "promoted_unique": report.promoted_unique,
                    "optimal_actions": report.optimal_actions,
                },
            }]

        jobs = [({"sweep_parameter": "epsilon", "sweep_value": eps}, (lambda e=eps: job(e))) for eps in exp.epsilons]

        def evaluate(records: List[RunRecord]) -> Dict[str, bool]:
            return {
                "gap_matches": _all(records, lambda r: abs(r.details["gap"] - r.details["expected_gap"]) <= 1e-8),
                "distance_bound_holds": _all(records, lambda r: r.holds),
                "promoted_unique": _all(records, lambda r: r.details["promoted_unique"]),
            }

        return jobs, evaluate

    # Soft stability sweep

    def _soft_stability_sweep(self, scenario: ScenarioFile, rng: np.random.Generator):
        exp: SoftStabilitySweep = scenario.experiment
        mdp = scenario.build_mdp()
        r0 = scenario.build_reward(exp.reward)
        state = scenario.mdp.state_index(exp.state)
        target = scenario.mdp.action_index(exp.target)
        selection = Selection.UNIFORM_OVER_TIES

        def eps_job(eps: float) -> List[Dict[str, Any]]:
            cert = discontinuity_sequence(mdp, r0, state, target, eps, exp.tie_tolerance, selection)
            rows = [_certificate_row(eps, cert.reward_distance, cert, selection)]
            for alpha in exp.alphas:
                rows.append(_soft_row(mdp, r0, cert.perturbed_reward, alpha, eps))
            return rows

        perturbations = [
            rng.uniform(-exp.perturbation_scale, exp.perturbation_scale, size=mdp.shape)
            for _ in range(exp.random_trials)
        ]

        def random_job(trial: int) -> List[Dict[str, Any]]:
            r2 = RewardTable(values=r0.values + perturbations[trial])
            rows = []
            for alpha in exp.alphas:
                row = _soft_row(mdp, r0, r2, alpha, float(trial))
                row["sweep_parameter"] = "trial"
                row["details"]["kind"] = "random"
                rows.append(row)
            return rows

        jobs = [({"sweep_parameter": "epsilon", "sweep_value": eps}, (lambda e=eps: eps_job(e))) for eps in exp.epsilons]
        jobs += [({"sweep_parameter": "trial", "sweep_value": float(t)}, (lambda t=t: random_job(t)))
                 for t in range(exp.random_trials)]

        def evaluate(records: List[RunRecord]) -> Dict[str, bool]:
            soft_ok = _all(records, lambda r: r.holds, "soft")
            if exp.random_trials:
                soft_ok = soft_ok and _all(records, lambda r: r.holds, "random")
            return {
                "soft_bound_holds": soft_ok,
                "hard_jump_persists": _all(
                    records, lambda r: abs(r.tv_jump - r.details["expected_tv_jump"]) <= EXACT_ATOL
                    and r.tv_jump > 0, "hard"
                ),
                "soft_tv_shrinks": _soft_tv_shrinks(records, exp.alphas),
            }

        return jobs, evaluate

    # Incomplete-reward check

    def _slacker_check(self, scenario: ScenarioFile, rng: np.random.Generator):
        exp: SlackerCheck = scenario.experiment
        mdp = scenario.build_mdp()
        r_train = scenario.build_reward(exp.train_reward)
        r_missing = scenario.build_reward(exp.missing_reward)
        mu = scenario.initial_distribution(exp.initial_distribution)
        focus = None if exp.focus_state is None else scenario.mdp.state_index(exp.focus_state)

        def job(missing: RewardTable, role: str) -> List[Dict[str, Any]]:
            cert = slacker_certificate(mdp, r_train, missing, mu, exp.selection, exp.tie_tolerance, focus)
            r_true = r_train + missing
            oracle_gap = _oracle_gap(mdp, r_train, r_true, mu, exp.selection, exp.tie_tolerance)
            report_state = focus if focus is not None else cert.state
            oracle_set = (
                brute_force_optimal_policies(mdp, r_true, report_state) if report_state is not None else []
            )
            return [{
                "sweep_parameter": "reward",
                "sweep_value": None,
                "parameters": {"role": role, "selection": exp.selection.value},
                "lhs": cert.true_value_gap,
                "rhs": oracle_gap,
                "holds": abs(cert.true_value_gap - oracle_gap) <= ORACLE_ATOL,
                "details": {
                    "kind": role,
                    "certificate": cert.model_dump(mode="json"),
                    "oracle_optimal_actions": oracle_set,
                },
            }]

        zero = RewardTable.zeros(mdp)
        jobs = [
            ({"sweep_parameter": "reward", "role": "main"}, lambda: job(r_missing, "main")),
            ({"sweep_parameter": "reward", "role": "control"}, lambda: job(zero, "control")),
        ]

        def evaluate(records: List[RunRecord]) -> Dict[str, bool]:
            main = [r for r in records if not r.failed and r.details.get("kind") == "main"]
            control = [r for r in records if not r.failed and r.details.get("kind") == "control"]
            if not main:
                return {name: False for name in SlackerCheck.VERDICTS}
            cert = main[0].details["certificate"]
            return {
                "witness_found": cert["witness_count"] > 0,
                "gap_positive": cert["true_value_gap"] > 1e-10,
                "gap_matches_oracle": bool(main[0].holds),
                "control_gap_zero": bool(control) and control[0].details["certificate"]["true_value_gap"] == 0.0
                and control[0].details["certificate"]["witness_count"] == 0,
                "train_tied_at_focus": len(cert["train_optimal_actions"]) >= 2,
                "true_unique_at_focus": len(cert["true_optimal_actions"]) == 1,
                "true_set_matches_oracle": cert["true_optimal_actions"] == main[0].details["oracle_optimal_actions"],
            }

        return jobs, evaluate

    # Multi-reward perturbation

    def _mixture_perturbation(self, scenario: ScenarioFile, rng: np.random.Generator):
        exp: MixturePerturbation = scenario.experiment
        mdp = scenario.build_mdp()
        tuple_ = scenario.build_tuple()
        weights = scenario.build_weights()
        mixture = scenario.build_mixture()
        state = scenario.mdp.state_index(exp.state)
        target = scenario.mdp.action_index(exp.target)
        scale = max(1.0, tuple_.tuple_norm)

        def eps_job(eps: float) -> List[Dict[str, Any]]:
            cert = multi_discontinuity_sequence(
                mdp, tuple_, weights, state, target, eps, exp.tie_tolerance, exp.selection
            )
            row = _certificate_row(eps, cert.tuple_distance, cert, exp.selection)
            row["details"]["effective_identity_error"] = cert.effective_identity_error
            lipschitz = effective_lipschitz_report(cert.perturbed_tuple, tuple_, weights)
            row["details"]["effective_lipschitz"] = lipschitz.model_dump()
            return [row]

        random_pairs = [
            (rng.uniform(-1, 1, size=(tuple_.size,) + mdp.shape), rng.uniform(-1, 1, size=(tuple_.size,) + mdp.shape))
            for _ in range(exp.random_trials)
        ]

        def random_job(trial: int) -> List[Dict[str, Any]]:
            a, b = random_pairs[trial]
            report = effective_lipschitz_report(RewardTuple.of(list(a)), RewardTuple.of(list(b)), weights)
            return [{
                "sweep_parameter": "trial",
                "sweep_value": float(trial),
                "lhs": report.lhs,
                "rhs": report.rhs,
                "holds": report.holds,
                "details": {"kind": "lipschitz"},
            }]

        def reduction_job() -> List[Dict[str, Any]]:
            return [_mixture_reduction_row(mdp, tuple_, mixture)]

        jobs = [({"sweep_parameter": "epsilon", "sweep_value": eps}, (lambda e=eps: eps_job(e))) for eps in exp.epsilons]
        jobs += [({"sweep_parameter": "trial", "sweep_value": float(t)}, (lambda t=t: random_job(t)))
                 for t in range(exp.random_trials)]
        if mixture is not None:
            jobs.append(({"sweep_parameter": "mixture"}, reduction_job))

        def evaluate(records: List[RunRecord]) -> Dict[str, bool]:
            verdicts = {
                "tuple_distance_bound_holds": _all(records, lambda r: r.holds, "hard"),
                "switch_is_target": _all(records, lambda r: r.details["switched_actions"] == [target], "hard"),
                "tv_jump_expected": _all(
                    records, lambda r: abs(r.tv_jump - r.details["expected_tv_jump"]) <= EXACT_ATOL, "hard"
                ),
                "effective_identity_exact": _all(
                    records, lambda r: r.details["effective_identity_error"] <= EXACT_ATOL * scale, "hard"
                ),
                "effective_lipschitz_holds": _all(records, lambda r: r.details["effective_lipschitz"]["holds"], "hard")
                and (not exp.random_trials or _all(records, lambda r: r.holds, "lipschitz")),
            }
            if mixture is not None:
                verdicts["mixture_reduction_holds"] = _all(records, lambda r: r.holds, "mixture")
            return verdicts

        return jobs, evaluate


def _certificate_row(eps: float, distance: float, cert, selection: Selection) -> Dict[str, Any]:
    return {
        "sweep_parameter": "epsilon",
        "sweep_value": eps,
        "parameters": {"state": cert.state, "target": cert.target, "selection": selection.value},
        "lhs": distance,
        "rhs": cert.distance_bound,
        "holds": distance <= cert.distance_bound + EXACT_ATOL,
        "tv_jump": cert.tv_jump,
        "details": {
            "kind": "hard",
            "tied_actions": cert.tied_actions,
            "switched_actions": cert.switched_action_set.actions,
            "target_gap": cert.target_gap,
            "suboptimal_preserved": cert.suboptimal_preserved,
            "expected_tv_jump": expected_tv_jump(selection, cert.tied_actions, cert.target),
        },
    }


def _soft_row(mdp: FiniteMdp, r1: RewardTable, r2: RewardTable, alpha: float, sweep_value: float) -> Dict[str, Any]:
    report = soft_policy_stability_report(mdp, r1, r2, alpha)
    return {
        "sweep_parameter": "epsilon",
        "sweep_value": sweep_value,
        "parameters": {"alpha": alpha},
        "lhs": report.max_tv,
        "rhs": report.bound,
        "holds": report.holds,
        "tv_jump": report.max_tv,
        "details": {"kind": "soft", "reward_distance": report.reward_distance},
    }


def _hard_verdicts(records: List[RunRecord]) -> Dict[str, bool]:
    return {
        "distance_bound_holds": _all(records, lambda r: r.holds, "hard"),
        "switch_is_target": _all(records, lambda r: r.details["switched_actions"] == [r.parameters["target"]], "hard"),
        "tv_jump_expected": _all(
            records, lambda r: abs(r.tv_jump - r.details["expected_tv_jump"]) <= EXACT_ATOL, "hard"
        ),
    }


def _soft_tv_shrinks(records: List[RunRecord], alphas: List[float]) -> bool:
    """Per alpha, the soft TV is nonincreasing as eps shrinks and scales at most linearly."""
    for alpha in alphas:
        rows = sorted(
            (r for r in records if not r.failed and r.details.get("kind") == "soft" and r.parameters["alpha"] == alpha),
            key=lambda r: r.sweep_value,
            reverse=True,
        )
        if len(rows) < 2:
            return False
        tvs = [r.tv_jump for r in rows]
        if any(later > earlier + EXACT_ATOL for earlier, later in zip(tvs, tvs[1:])):
            return False
        ratio = rows[-1].sweep_value / rows[0].sweep_value
        if tvs[-1] > 2.0 * ratio * tvs[0] + EXACT_ATOL:
            return False
    return True


def _oracle_gap(
    mdp: FiniteMdp,
    r_train: RewardTable,
    r_true: RewardTable,
    mu: np.ndarray,
    selection: Selection,
    tie_tolerance: Optional[float],
) -> float:
    """Brute-force optimum minus the exact value of the greedy training policy, both under r_true."""
    pi_train = greedy_policy(solve_q_star(mdp, r_train), selection, tie_tolerance)
    _, v_train = policy_evaluation(mdp, pi_train, r_true)
    gap = brute_force_optimal_value(mdp, r_true, mu) - float(mu @ v_train.values)
    return 0.0 if abs(gap) < EXACT_ATOL else gap


def _mixture_reduction_row(mdp: FiniteMdp, tuple_: RewardTuple, mixture: MixtureSpec) -> Dict[str, Any]:
    """
    With a shared initial distribution and weights equal to the class priors,
    the mixture objective equals the value of the effective reward.
    """
    priors = mixture.class_priors
    shared = priors @ mixture.initial_distributions
    pooled = MixtureSpec(class_priors=priors, initial_distributions=np.tile(shared, (priors.size, 1)))
    policy = PolicyTable.uniform(mdp.n_states, mdp.n_actions)
    lhs = mixture_objective(mdp, tuple_, pooled, policy)
    _, v_eff = policy_evaluation(mdp, policy, effective_reward(tuple_, constant_weights(mdp, priors)))
    rhs = float(shared @ v_eff.values)
    return {
        "sweep_parameter": "mixture",
        "sweep_value": None,
        "parameters": {"policy": "uniform"},
        "lhs": lhs,
        "rhs": rhs,
        "holds": abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs)),
        "details": {"kind": "mixture", "objective": mixture_objective(mdp, tuple_, mixture, policy)},
    }


def run_experiment(
    scenario: ScenarioFile,
    seed: Optional[int] = None,
    timing: bool = False,
    settings: Optional[LabSettings] = None,
) -> ExperimentReport:
    return ExperimentRunner(settings).run(scenario, seed=seed, timing=timing)
