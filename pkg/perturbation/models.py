"""
Models for reward perturbations and the certificates they produce.
"""
from typing import List, Tuple

import numpy as np
from pydantic import Field, field_serializer, field_validator, model_validator

from mdp.models import ActionSet, ArrayModel, RewardTable, Selection


class BumpTable(ArrayModel):
    """A [0, 1]-valued bump on the (state, action) grid, equal to 1 at its center."""
    values: np.ndarray
    center: Tuple[int, int]
    protected: List[int] = Field(default_factory=list, description="Actions at the center state pinned to 0")

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, v):
        arr = np.array(v, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"Bump must be a 2-d table, got shape {arr.shape}")
        if np.any(arr < 0) or np.any(arr > 1):
            raise ValueError("Bump values must lie in [0, 1]")
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def check_center(self):
        s, a = self.center
        if self.values[s, a] != 1.0:
            raise ValueError("Bump must equal 1 at its center")
        for action in self.protected:
            if action != a and self.values[s, action] != 0.0:
                raise ValueError(f"Bump must vanish on protected action {action}")
        return self

    @field_serializer("values")
    def serialize_values(self, v: np.ndarray):
        return v.tolist()

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.values))


class DiscontinuityCertificate(ArrayModel):
    """
    Evidence that an eps-small reward change flips the optimal action set.

    reward_distance <= epsilon * (1 + gamma) while the optimal set at state
    switches from the tied set to {target}.
    """
    epsilon: float = Field(..., gt=0)
    state: int
    target: int
    selection: Selection
    perturbed_reward: RewardTable
    reward_distance: float
    distance_bound: float
    tied_actions: List[int]
    switched_action_set: ActionSet
    target_gap: float = Field(..., description="Smallest Q gap of target over the other formerly tied actions")
    suboptimal_preserved: bool
    tv_jump: float = Field(..., ge=0, le=1)

    @property
    def valid(self) -> bool:
        return (
            self.reward_distance <= self.distance_bound + 1e-12
            and self.switched_action_set.actions == [self.target]
            and self.suboptimal_preserved
        )


class TieBreakerReport(ArrayModel):
    """Outcome of a tie-breaking perturbation at one state."""
    epsilon: float
    state: int
    demoted: int
    promoted: int
    reward: RewardTable
    reward_distance: float
    gap: float = Field(..., description="Q*(state, promoted) - Q*(state, demoted) after the perturbation")
    expected_gap: float
    promoted_unique: bool
    optimal_actions: List[int]
