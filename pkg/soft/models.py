"""
Models for entropy-regularized dynamic programming.
"""
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from mdp.models import ArrayModel, frozen_array


class Temperature(BaseModel):
    """Entropy temperature alpha > 0."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0)

    @classmethod
    def of(cls, value: Union["Temperature", float]) -> "Temperature":
        return value if isinstance(value, Temperature) else cls(alpha=value)


class SoftQTable(ArrayModel):
    """Soft action-value table tied to the temperature it was computed at."""
    values: np.ndarray
    alpha: Temperature

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, v):
        return frozen_array(v, 2, "Soft Q table")

    @field_serializer("values")
    def serialize_values(self, v: np.ndarray):
        return v.tolist()


class SoftmaxBoundReport(BaseModel):
    """L1 distance of two softmax rows against max|x - y| / alpha."""
    l1: float
    bound: float
    ratio: float = Field(..., description="l1 / bound, at most 1")
    holds: bool


class SoftStabilityReport(BaseModel):
    """Largest per-state TV between two Boltzmann policies against its Lipschitz bound."""
    max_tv: float
    bound: float
    reward_distance: float
    alpha: float
    holds: bool


class SoftHardGapReport(BaseModel):
    """Distance between soft and hard optimal Q tables."""
    alpha: float
    gap: float
    bound: float = Field(..., description="alpha * log(n_actions) / (1 - gamma)")
    holds: bool
