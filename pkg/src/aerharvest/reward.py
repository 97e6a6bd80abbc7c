"""Per-agent reward for one mission slot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RewardParams:
    alpha: float = 1.0  # per collected data unit, shared by all agents
    beta: float = -1.0  # safety-controller rejection
    gamma_crash: float = -50.0  # battery ran out while airborne
    epsilon_move: float = -0.1  # every flown slot

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta > 0 or self.gamma_crash > 0 or self.epsilon_move > 0:
            raise ValueError("penalties beta, gamma_crash and epsilon_move must be <= 0")


def collected_data(data_before, data_after) -> float:
    """Total data removed from all devices between two snapshots."""
    return float(np.sum(np.asarray(data_before, dtype=float) - np.asarray(data_after, dtype=float)))


def step_reward(data_before, data_after, rejected: bool, crashed: bool, params: RewardParams) -> float:
    reward = params.alpha * collected_data(data_before, data_after) + params.epsilon_move
    if rejected:
        reward += params.beta
    if crashed:
        reward += params.gamma_crash
    return reward
