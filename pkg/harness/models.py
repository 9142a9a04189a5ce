"""
Scenario file schema and experiment reports.

A scenario is a hand-written JSON document: a sparse MDP, named reward
tables, an optional reward tuple, one experiment block and the verdicts the
experiment is expected to produce.
"""
from typing import Annotated, Any, ClassVar, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from mdp.models import FiniteMdp, RewardTable, Selection
from multi_reward.models import MixtureSpec, RewardTuple, WeightTable

Ref = Union[int, str]
Entry = List[Union[int, float, str]]

ALL_ACTIONS = "*"


def first_error_message(exc: ValidationError) -> str:
    error = exc.errors()[0]
    message = str(error.get("msg", exc))
    return message.removeprefix("Value error, ")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MdpSpec(StrictModel):
    """Sparse MDP description: transitions are [state, action, next_state(, prob)] rows."""
    states: Union[int, List[str]]
    actions: Union[int, List[str]]
    discount: float = Field(..., ge=0, lt=1)
    transitions: List[Entry] = Field(default_factory=list)
    absorbing: List[Ref] = Field(default_factory=list)

    @field_validator("states", "actions")
    @classmethod
    def check_space(cls, v):
        if isinstance(v, int) and v < 1:
            raise ValueError("must have at least one element")
        if isinstance(v, list):
            if not v:
                raise ValueError("must have at least one element")
            if len(set(v)) != len(v):
                raise ValueError("labels must be unique")
        return v

    @property
    def n_states(self) -> int:
        return self.states if isinstance(self.states, int) else len(self.states)

    @property
    def n_actions(self) -> int:
        return self.actions if isinstance(self.actions, int) else len(self.actions)

    @property
    def state_labels(self) -> List[str]:
        return list(self.states) if isinstance(self.states, list) else [f"s{i}" for i in range(self.states)]

    @property
    def action_labels(self) -> List[str]:
        return list(self.actions) if isinstance(self.actions, list) else [f"a{i}" for i in range(self.actions)]

    @staticmethod
    def _resolve(ref: Any, labels: List[str], what: str) -> int:
        if isinstance(ref, bool) or isinstance(ref, float):
            raise ValueError(f"{what} reference {ref!r} must be a label or an integer index")
        if isinstance(ref, int):
            if not 0 <= ref < len(labels):
                raise ValueError(f"{what} index {ref} is out of range (0..{len(labels) - 1})")
            return ref
        if ref in labels:
            return labels.index(ref)
        if isinstance(ref, str) and ref.isdigit() and int(ref) < len(labels):
            return int(ref)
        raise ValueError(f"Unknown {what} {ref!r}")

    def state_index(self, ref: Ref) -> int:
        return self._resolve(ref, self.state_labels, "state")

    def action_index(self, ref: Ref) -> int:
        return self._resolve(ref, self.action_labels, "action")

    def action_indices(self, ref: Ref) -> List[int]:
        if ref == ALL_ACTIONS:
            return list(range(self.n_actions))
        return [self.action_index(ref)]

    def distribution(self, mapping: Dict[str, float]) -> np.ndarray:
        """Dense state distribution from a {state: probability} mapping."""
        dist = np.zeros(self.n_states)
        for ref, prob in mapping.items():
            dist[self.state_index(ref)] += float(prob)
        return dist

    def build(self) -> FiniteMdp:
        """
        Dense FiniteMdp. Absorbing states loop to themselves under every action.

        Raises:
            ValueError: a reference does not resolve or a row is not a distribution.
        """
        transition = np.zeros((self.n_states, self.n_actions, self.n_states))
        absorbing = {self.state_index(ref) for ref in self.absorbing}
        for row, entry in enumerate(self.transitions):
            if len(entry) not in (3, 4):
                raise ValueError(f"Transition {row} must be [state, action, next_state] or [state, action, next_state, prob]")
            s = self.state_index(entry[0])
            if s in absorbing:
                raise ValueError(f"Transition {row} leaves absorbing state {self.state_labels[s]}")
            nxt = self.state_index(entry[2])
            prob = float(entry[3]) if len(entry) == 4 else 1.0
            for a in self.action_indices(entry[1]):
                transition[s, a, nxt] += prob
        for s in absorbing:
            transition[s, :, s] = 1.0
        try:
            return FiniteMdp(
                n_states=self.n_states,
                n_actions=self.n_actions,
                transition=transition,
                discount=self.discount,
                state_labels=self.state_labels,
                action_labels=self.action_labels,
            )
        except ValidationError as exc:
            raise ValueError(first_error_message(exc)) from exc


class RewardSpec(StrictModel):
    """A reward table: a default value plus sparse [state, action | "*", value] entries."""
    default: float = 0.0
    entries: List[Entry] = Field(default_factory=list)

    def build(self, mdp: MdpSpec) -> RewardTable:
        values = np.full((mdp.n_states, mdp.n_actions), self.default)
        for row, entry in enumerate(self.entries):
            if len(entry) != 3:
                raise ValueError(f"Reward entry {row} must be [state, action, value]")
            s = mdp.state_index(entry[0])
            values[s, mdp.action_indices(entry[1])] = float(entry[2])
        return RewardTable(values=values)


class WeightsSpec(StrictModel):
    default: List[float]
    rows: Dict[str, List[float]] = Field(default_factory=dict)


class MixtureBlock(StrictModel):
    class_priors: List[float]
    initial_distributions: List[Dict[str, float]]


class RewardTupleSpec(StrictModel):
    components: List[str] = Field(..., min_length=1)
    weights: WeightsSpec
    mixture: Optional[MixtureBlock] = None


class ExperimentBase(StrictModel):
    VERDICTS: ClassVar[Tuple[str, ...]] = ()
    tie_tolerance: Optional[float] = Field(None, ge=0)


class DiscontinuitySweep(ExperimentBase):
    VERDICTS: ClassVar[Tuple[str, ...]] = (
        "distance_bound_holds", "switch_is_target", "gap_equals_epsilon",
        "tv_jump_expected", "suboptimal_preserved", "soft_bound_holds",
    )
    kind: Literal["discontinuity_sweep"]
    reward: str
    state: Ref
    target: Ref
    epsilons: List[float] = Field(..., min_length=1)
    selection: Selection = Selection.UNIFORM_OVER_TIES
    alphas: List[float] = Field(default_factory=list)


class TieBreakerSweep(ExperimentBase):
    VERDICTS: ClassVar[Tuple[str, ...]] = ("gap_matches", "distance_bound_holds", "promoted_unique")
    kind: Literal["tie_breaker_sweep"]
    reward: str
    state: Ref
    demoted: Ref
    promoted: Ref
    epsilons: List[float] = Field(..., min_length=1)
    strict: bool = False


class SoftStabilitySweep(ExperimentBase):
    VERDICTS: ClassVar[Tuple[str, ...]] = ("soft_bound_holds", "hard_jump_persists", "soft_tv_shrinks")
    kind: Literal["soft_stability_sweep"]
    reward: str
    state: Ref
    target: Ref
    epsilons: List[float] = Field(..., min_length=2)
    alphas: List[float] = Field(..., min_length=1)
    random_trials: int = Field(0, ge=0)
    perturbation_scale: float = Field(0.1, gt=0)


class SlackerCheck(ExperimentBase):
    VERDICTS: ClassVar[Tuple[str, ...]] = (
        "witness_found", "gap_positive", "gap_matches_oracle", "control_gap_zero",
        "train_tied_at_focus", "true_unique_at_focus", "true_set_matches_oracle",
    )
    kind: Literal["slacker_check"]
    train_reward: str
    missing_reward: str
    initial_distribution: Dict[str, float]
    selection: Selection = Selection.LOWEST_INDEX
    focus_state: Optional[Ref] = None


class MixturePerturbation(ExperimentBase):
    VERDICTS: ClassVar[Tuple[str, ...]] = (
        "tuple_distance_bound_holds", "switch_is_target", "tv_jump_expected",
        "effective_identity_exact", "effective_lipschitz_holds", "mixture_reduction_holds",
    )
    kind: Literal["mixture_perturbation"]
    state: Ref
    target: Ref
    epsilons: List[float] = Field(..., min_length=1)
    selection: Selection = Selection.UNIFORM_OVER_TIES
    random_trials: int = Field(0, ge=0)


Experiment = Annotated[
    Union[DiscontinuitySweep, TieBreakerSweep, SoftStabilitySweep, SlackerCheck, MixturePerturbation],
    Field(discriminator="kind"),
]


class ScenarioFile(StrictModel):
    """One self-checking experiment on one finite MDP."""
    id: str = Field(..., min_length=1)
    description: str = ""
    seed: int = Field(0, ge=0)
    mdp: MdpSpec
    rewards: Dict[str, RewardSpec] = Field(default_factory=dict)
    reward_tuple: Optional[RewardTupleSpec] = None
    experiment: Experiment
    expected: Dict[str, bool] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_references(self):
        self.build_mdp()
        for name, spec in self.rewards.items():
            try:
                spec.build(self.mdp)
            except ValueError as exc:
                raise ValueError(f"rewards.{name}: {exc}") from exc

        exp = self.experiment
        for field in ("reward", "train_reward", "missing_reward"):
            name = getattr(exp, field, None)
            if name is not None and name not in self.rewards:
                raise ValueError(f"experiment.{field} names unknown reward {name!r}")
        for field in ("state", "focus_state"):
            ref = getattr(exp, field, None)
            if ref is not None:
                self.mdp.state_index(ref)
        for field in ("target", "demoted", "promoted"):
            ref = getattr(exp, field, None)
            if ref is not None:
                self.mdp.action_index(ref)
        if isinstance(exp, SlackerCheck):
            self.initial_distribution(exp.initial_distribution)

        if self.reward_tuple is not None:
            self.build_tuple()
            self.build_weights()
            if self.reward_tuple.mixture is not None:
                self.build_mixture()
        elif isinstance(exp, MixturePerturbation):
            raise ValueError("mixture_perturbation needs a reward_tuple block")

        unknown = sorted(set(self.expected) - set(exp.VERDICTS) - {"no_run_failures"})
        if unknown:
            raise ValueError(f"expected names unknown verdicts {unknown} for {exp.kind}")
        return self

    def build_mdp(self) -> FiniteMdp:
        return self.mdp.build()

    def build_reward(self, name: str) -> RewardTable:
        return self.rewards[name].build(self.mdp)

    def initial_distribution(self, mapping: Dict[str, float]) -> np.ndarray:
        dist = self.mdp.distribution(mapping)
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-12:
            raise ValueError(f"Initial distribution {mapping} is not a probability vector")
        return dist

    def build_tuple(self) -> RewardTuple:
        spec = self.reward_tuple
        missing = [name for name in spec.components if name not in self.rewards]
        if missing:
            raise ValueError(f"reward_tuple.components names unknown rewards {missing}")
        return RewardTuple(components=[self.build_reward(name) for name in spec.components])

    def build_weights(self) -> WeightTable:
        spec = self.reward_tuple
        n_components = len(spec.components)
        weights = np.tile(np.asarray(spec.weights.default, dtype=float), (self.mdp.n_states, 1))
        if weights.shape[1] != n_components:
            raise ValueError(f"reward_tuple.weights.default has {weights.shape[1]} entries, expected {n_components}")
        for ref, row in spec.weights.rows.items():
            if len(row) != n_components:
                raise ValueError(f"reward_tuple.weights.rows[{ref}] has {len(row)} entries, expected {n_components}")
            weights[self.mdp.state_index(ref)] = row
        try:
            return WeightTable(weights=weights)
        except ValidationError as exc:
            raise ValueError(f"reward_tuple.weights: {first_error_message(exc)}") from exc

    def build_mixture(self) -> Optional[MixtureSpec]:
        if self.reward_tuple is None or self.reward_tuple.mixture is None:
            return None
        block = self.reward_tuple.mixture
        if len(block.class_priors) != len(self.reward_tuple.components):
            raise ValueError(
                f"reward_tuple.mixture has {len(block.class_priors)} classes, "
                f"expected {len(self.reward_tuple.components)}"
            )
        try:
            return MixtureSpec(
                class_priors=block.class_priors,
                initial_distributions=[self.mdp.distribution(d) for d in block.initial_distributions],
            )
        except ValidationError as exc:
            raise ValueError(f"reward_tuple.mixture: {first_error_message(exc)}") from exc


class RunRecord(BaseModel):
    """One run of a sweep. Bound checks carry both sides of the inequality."""
    index: int = Field(..., ge=0)
    sweep_parameter: str
    sweep_value: Optional[float] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    holds: Optional[bool] = None
    tv_jump: Optional[float] = None
    details: Dict[str, Any] = Field(default_factory=dict)
    failed: bool = False
    error: Optional[str] = None


class ExperimentReport(BaseModel):
    scenario_id: str
    description: str = Field("", description="Scenario description, including what the run does and does not reproduce")
    experiment: str
    seed: int
    records: List[RunRecord] = Field(default_factory=list)
    verdicts: Dict[str, bool] = Field(default_factory=dict)
    expected: Dict[str, bool] = Field(default_factory=dict)
    passed: bool
    run_failures: int = Field(0, ge=0)
    tool_version: str
    wall_clock_seconds: Optional[float] = None

    @property
    def mismatches(self) -> List[str]:
        return [name for name, value in self.verdicts.items() if self.expected.get(name, True) != value]
