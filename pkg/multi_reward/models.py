"""
Models for reward tuples, aggregation weights and mixture objectives.
"""
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_serializer, field_validator, model_validator

from mdp.models import PROB_ATOL, ActionSet, ArrayModel, RewardTable, Selection, frozen_array


class RewardTuple(ArrayModel):
    """N reward tables on one (state, action) grid."""
    components: List[RewardTable] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_shapes(self):
        shape = self.components[0].values.shape
        for k, component in enumerate(self.components):
            if component.values.shape != shape:
                raise ValueError(f"Component {k} has shape {component.values.shape}, expected {shape}")
        return self

    @classmethod
    def of(cls, tables: Sequence) -> "RewardTuple":
        return cls(components=[t if isinstance(t, RewardTable) else RewardTable(values=t) for t in tables])

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def stacked(self) -> np.ndarray:
        """(N, n_states, n_actions) array of the components."""
        return np.stack([c.values for c in self.components])

    @property
    def tuple_norm(self) -> float:
        """max_k sup|R_k|."""
        return max(c.sup_norm for c in self.components)

    def shift(self, delta: np.ndarray) -> "RewardTuple":
        """Add the same table to every component."""
        return RewardTuple(components=[RewardTable(values=c.values + delta) for c in self.components])

    def __sub__(self, other: "RewardTuple") -> "RewardTuple":
        if self.size != other.size:
            raise ValueError(f"Tuples have {self.size} and {other.size} components")
        return RewardTuple(components=[a - b for a, b in zip(self.components, other.components)])

    def __add__(self, other: "RewardTuple") -> "RewardTuple":
        if self.size != other.size:
            raise ValueError(f"Tuples have {self.size} and {other.size} components")
        return RewardTuple(components=[a + b for a, b in zip(self.components, other.components)])


class WeightTable(ArrayModel):
    """Per-state aggregation weights w_k(s); each row is a distribution over components."""
    weights: np.ndarray

    @field_validator("weights", mode="before")
    @classmethod
    def coerce_weights(cls, v):
        arr = frozen_array(v, 2, "Weight table")
        if np.any(arr < 0):
            row = int(np.argwhere(arr < 0)[0][0])
            raise ValueError(f"Weight row {row} has a negative entry")
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_ATOL)
        if bad.size:
            raise ValueError(f"Weight row {bad[0]} sums to {sums[bad[0]]:.12g}, not 1")
        return arr

    @field_serializer("weights")
    def serialize_weights(self, v: np.ndarray):
        return v.tolist()

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]


class MixtureSpec(ArrayModel):
    """Class priors p_k and one initial state distribution per class."""
    class_priors: np.ndarray
    initial_distributions: np.ndarray

    @field_validator("class_priors", mode="before")
    @classmethod
    def coerce_priors(cls, v):
        arr = frozen_array(v, 1, "Class priors")
        if np.any(arr <= 0):
            raise ValueError("Class priors must be strictly positive")
        if abs(arr.sum() - 1.0) > PROB_ATOL:
            raise ValueError(f"Class priors sum to {arr.sum():.12g}, not 1")
        return arr

    @field_validator("initial_distributions", mode="before")
    @classmethod
    def coerce_distributions(cls, v):
        arr = frozen_array(v, 2, "Initial distributions")
        if np.any(arr < 0):
            raise ValueError("Initial distributions must be nonnegative")
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_ATOL)
        if bad.size:
            raise ValueError(f"Initial distribution {bad[0]} sums to {sums[bad[0]]:.12g}, not 1")
        return arr

    @model_validator(mode="after")
    def check_class_count(self):
        if self.initial_distributions.shape[0] != self.class_priors.size:
            raise ValueError(
                f"{self.class_priors.size} class priors but {self.initial_distributions.shape[0]} initial distributions"
            )
        return self

    @field_serializer("class_priors", "initial_distributions")
    def serialize_arrays(self, v: np.ndarray):
        return v.tolist()


class MultiDiscontinuityCertificate(ArrayModel):
    """
    Tuple-level discontinuity: the same reward delta is added to every
    component, so the effective reward moves by exactly that delta.
    """
    epsilon: float = Field(..., gt=0)
    state: int
    target: int
    selection: Selection
    perturbed_tuple: RewardTuple
    tuple_distance: float
    distance_bound: float
    tied_actions: List[int]
    switched_action_set: ActionSet
    target_gap: float
    suboptimal_preserved: bool
    tv_jump: float = Field(..., ge=0, le=1)
    effective_identity_error: float = Field(..., ge=0)

    @property
    def valid(self) -> bool:
        return (
            self.tuple_distance <= self.distance_bound + 1e-12
            and self.switched_action_set.actions == [self.target]
            and self.suboptimal_preserved
        )


class EffectiveLipschitzReport(BaseModel):
    """sup|R_eff(t1) - R_eff(t2)| against the tuple norm of t1 - t2."""
    lhs: float
    rhs: float
    holds: bool
