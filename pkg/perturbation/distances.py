"""
Distances between policy rows.
"""
from typing import Sequence

import numpy as np

from mdp.errors import ArgumentError
from mdp.models import PolicyTable
from mdp.solver import as_distribution


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance: half the L1 distance between two distributions."""
    p_arr = as_distribution(p, name="p")
    q_arr = as_distribution(q, name="q")
    if p_arr.shape != q_arr.shape:
        raise ArgumentError(f"Rows have different lengths: {p_arr.size} vs {q_arr.size}")
    return float(min(1.0, 0.5 * np.abs(p_arr - q_arr).sum()))


def max_state_tv(pi1: PolicyTable, pi2: PolicyTable) -> float:
    """Largest per-state TV distance between two policies."""
    if pi1.probs.shape != pi2.probs.shape:
        raise ArgumentError(f"Policies have shapes {pi1.probs.shape} and {pi2.probs.shape}")
    return max(tv_distance(a, b) for a, b in zip(pi1.probs, pi2.probs))
