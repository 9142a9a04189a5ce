"""
Models for the incomplete-reward suboptimality certificate.
"""
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from mdp.models import Selection


class SlackerConditions(BaseModel):
    """The three conditions a witness (s, a) must satisfy."""
    model_config = ConfigDict(frozen=True)

    action_optimal: bool = Field(False, description="a is optimal at s for the training reward")
    positive_advantage: bool = Field(False, description="a has positive advantage under the missing reward")
    reachable: bool = Field(False, description="s has positive discounted occupancy under the training policy")

    @property
    def all_met(self) -> bool:
        return self.action_optimal and self.positive_advantage and self.reachable


class SlackerCertificate(BaseModel):
    """
    Evidence that a policy optimal for r_train is strictly suboptimal for
    r_true = r_train + r_missing.
    """
    model_config = ConfigDict(frozen=True)

    state: Optional[int] = None
    action: Optional[int] = None
    advantage_missing: float = 0.0
    reachability: float = Field(0.0, ge=0)
    true_value_gap: float = Field(..., ge=0)
    conditions_met: SlackerConditions = Field(default_factory=SlackerConditions)
    witness_count: int = Field(0, ge=0)
    selection: Selection
    train_optimal_actions: List[int] = Field(default_factory=list)
    true_optimal_actions: List[int] = Field(default_factory=list)

    @property
    def has_witness(self) -> bool:
        return self.witness_count > 0

    @property
    def sound(self) -> bool:
        """A complete witness implies a strictly positive gap."""
        return not self.conditions_met.all_met or self.true_value_gap > 0
