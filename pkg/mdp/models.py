"""
Data models for finite MDPs and the dense tables that live on them.

Every table wraps a read-only numpy array. Instances are frozen after
construction and safe to share across threads.
"""
from enum import Enum
from typing import Any, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

# Numeric defaults shared by the solvers.
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
PROB_ATOL = 1e-12
DIRECT_SOLVE_LIMIT = 4096
RELATIVE_TIE_TOL = 1e-9


class Selection(str, Enum):
    """Rules for turning a set of tied optimal actions into a policy row."""
    LOWEST_INDEX = "lowest_index"
    UNIFORM_OVER_TIES = "uniform_over_ties"
    HIGHEST_INDEX = "highest_index"


def frozen_array(value: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be a {ndim}-d table, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} entries must be finite")
    arr.flags.writeable = False
    return arr


def _field_equal(a: Any, b: Any) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.shape(a) == np.shape(b) and bool(np.array_equal(a, b))
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_field_equal(x, y) for x, y in zip(a, b))
    return a == b


class ArrayModel(BaseModel):
    """Frozen pydantic model whose equality understands numpy fields."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return all(
            _field_equal(getattr(self, name), getattr(other, name))
            for name in type(self).model_fields
        )


class FiniteMdp(ArrayModel):
    """The (S, A, P, gamma) tuple with a dense transition tensor."""
    n_states: int = Field(..., gt=0)
    n_actions: int = Field(..., gt=0)
    transition: np.ndarray = Field(..., description="P[s, a, s'] probabilities")
    discount: float = Field(..., ge=0, lt=1)
    state_labels: Optional[List[str]] = None
    action_labels: Optional[List[str]] = None

    @field_validator("transition", mode="before")
    @classmethod
    def coerce_transition(cls, v):
        return frozen_array(v, 3, "Transition tensor")

    @model_validator(mode="after")
    def check_transition(self):
        expected = (self.n_states, self.n_actions, self.n_states)
        if self.transition.shape != expected:
            raise ValueError(f"Transition tensor shape {self.transition.shape} does not match {expected}")

        negative = np.argwhere(self.transition < 0)
        if negative.size:
            s, a, s_next = negative[0]
            raise ValueError(
                f"Transition row ({self.state_name(s)}, {self.action_name(a)}) has a negative "
                f"entry towards {self.state_name(s_next)}"
            )

        sums = self.transition.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > PROB_ATOL)
        if bad.size:
            s, a = bad[0]
            raise ValueError(
                f"Transition row ({self.state_name(s)}, {self.action_name(a)}) sums to {sums[s, a]:.12g}, not 1"
            )

        for labels, count, kind in (
            (self.state_labels, self.n_states, "state"),
            (self.action_labels, self.n_actions, "action"),
        ):
            if labels is not None and len(labels) != count:
                raise ValueError(f"Expected {count} {kind} labels, got {len(labels)}")
        return self

    @field_serializer("transition")
    def serialize_transition(self, v: np.ndarray):
        return v.tolist()

    @classmethod
    def from_transition(cls, transition: Any, discount: float, **labels) -> "FiniteMdp":
        """Build an MDP, inferring the counts from the tensor shape."""
        arr = np.asarray(transition, dtype=float)
        if arr.ndim != 3:
            raise ValueError(f"Transition tensor must be 3-d, got shape {arr.shape}")
        return cls(
            n_states=arr.shape[0],
            n_actions=arr.shape[1],
            transition=arr,
            discount=discount,
            **labels,
        )

    @property
    def shape(self) -> tuple:
        return (self.n_states, self.n_actions)

    def state_name(self, s: int) -> str:
        return self.state_labels[s] if self.state_labels else f"s{s}"

    def action_name(self, a: int) -> str:
        return self.action_labels[a] if self.action_labels else f"a{a}"


class RewardTable(ArrayModel):
    """A real value per (state, action) pair, measured in sup-norm."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, v):
        return frozen_array(v, 2, "Reward table")

    @field_serializer("values")
    def serialize_values(self, v: np.ndarray):
        return v.tolist()

    @classmethod
    def zeros(cls, mdp: FiniteMdp) -> "RewardTable":
        return cls(values=np.zeros(mdp.shape))

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def shift(self, c: float) -> "RewardTable":
        """Add the constant c to every entry."""
        return RewardTable(values=self.values + c)

    def __add__(self, other: "RewardTable") -> "RewardTable":
        return RewardTable(values=self.values + other.values)

    def __sub__(self, other: "RewardTable") -> "RewardTable":
        return RewardTable(values=self.values - other.values)

    def scale(self, c: float) -> "RewardTable":
        return RewardTable(values=self.values * c)


class QTable(ArrayModel):
    """Action-value function Q(s, a)."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, v):
        return frozen_array(v, 2, "Q table")

    @field_serializer("values")
    def serialize_values(self, v: np.ndarray):
        return v.tolist()

    def row(self, state: int) -> np.ndarray:
        return self.values[state]

    def state_values(self) -> np.ndarray:
        """max_a Q(s, a) for every state."""
        return self.values.max(axis=1)


class ValueTable(ArrayModel):
    """State-value function V(s)."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, v):
        return frozen_array(v, 1, "Value table")

    @field_serializer("values")
    def serialize_values(self, v: np.ndarray):
        return v.tolist()

    def weighted(self, mu: Sequence[float]) -> float:
        """Expectation of V under the initial distribution mu."""
        return float(np.dot(np.asarray(mu, dtype=float), self.values))


class PolicyTable(ArrayModel):
    """Per-state probability distribution over actions."""
    probs: np.ndarray

    @field_validator("probs", mode="before")
    @classmethod
    def coerce_probs(cls, v):
        arr = frozen_array(v, 2, "Policy table")
        if np.any(arr < 0):
            raise ValueError("Policy probabilities must be nonnegative")
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_ATOL)
        if bad.size:
            raise ValueError(f"Policy row {bad[0]} sums to {sums[bad[0]]:.12g}, not 1")
        return arr

    @field_serializer("probs")
    def serialize_probs(self, v: np.ndarray):
        return v.tolist()

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "PolicyTable":
        """Point-mass rows, one chosen action per state."""
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), np.asarray(actions, dtype=int)] = 1.0
        return cls(probs=probs)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "PolicyTable":
        return cls(probs=np.full((n_states, n_actions), 1.0 / n_actions))

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(np.sum(self.probs == 1.0, axis=1) == 1))

    def row(self, state: int) -> np.ndarray:
        return self.probs[state]


class ActionSet(BaseModel):
    """The argmax set A*(s) of a Q row, up to a tie tolerance."""
    model_config = ConfigDict(frozen=True)

    state: int = Field(..., ge=0)
    actions: List[int] = Field(..., min_length=1)
    tie_tolerance: float = Field(..., ge=0)

    @field_validator("actions")
    @classmethod
    def actions_sorted_unique(cls, v):
        if v != sorted(set(v)):
            raise ValueError("Actions must be sorted ascending without repeats")
        return v

    @property
    def is_singleton(self) -> bool:
        return len(self.actions) == 1

    def __contains__(self, action: int) -> bool:
        return action in self.actions

    def __len__(self) -> int:
        return len(self.actions)


class QLipschitzReport(BaseModel):
    """Measured sup|Q*_1 - Q*_2| against sup|r1 - r2| / (1 - gamma)."""
    lhs: float
    rhs: float
    ratio: float = Field(..., description="lhs / rhs; 1 means the bound is tight")
    lipschitz_estimate: float = Field(..., description="lhs / sup|r1 - r2|")
    holds: bool


class StabilityRadiusReport(BaseModel):
    """Reward radius within which the greedy policy cannot change."""
    min_gap: float
    radius: float
    unique: bool
    degenerate_states: List[int] = Field(default_factory=list)
