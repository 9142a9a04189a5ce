"""
Shared fixtures: the two-path MDP and its tied reward.

s0 --a1--> sL --*--> term
s0 --a2--> sR --*--> term   (term absorbing, gamma = 0.9, r(s0, .) = 1)
"""
import numpy as np
import pytest

from mdp.models import FiniteMdp, RewardTable

S0, SL, SR, TERM = range(4)
A1, A2 = range(2)


def make_twopath(discount: float = 0.9) -> FiniteMdp:
    transition = np.zeros((4, 2, 4))
    transition[S0, A1, SL] = 1.0
    transition[S0, A2, SR] = 1.0
    transition[SL, :, TERM] = 1.0
    transition[SR, :, TERM] = 1.0
    transition[TERM, :, TERM] = 1.0
    return FiniteMdp.from_transition(
        transition,
        discount,
        state_labels=["s0", "sL", "sR", "term"],
        action_labels=["a1", "a2"],
    )


def twopath_reward() -> RewardTable:
    values = np.zeros((4, 2))
    values[S0, :] = 1.0
    return RewardTable(values=values)


@pytest.fixture
def twopath():
    return make_twopath()


@pytest.fixture
def tied_reward():
    return twopath_reward()


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
