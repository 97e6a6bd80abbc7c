"""Ring-buffer replay memory with combined experience replay sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..obsmap import Observation


@dataclass(frozen=True)
class Experience:
    obs: Observation
    action: int
    reward: float
    next_obs: Observation
    terminal: bool


@dataclass
class Batch:
    local: np.ndarray
    global_: np.ndarray
    scalar: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_local: np.ndarray
    next_global: np.ndarray
    next_scalar: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.action)


class ReplayMemory:
    """Fixed-capacity FIFO store of experiences kept as preallocated arrays."""

    def __init__(self, capacity: int, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.dtype = dtype
        self._arrays: dict[str, np.ndarray] | None = None
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def _allocate(self, exp: Experience) -> None:
        cap = self.capacity
        local_shape = exp.obs.local.shape
        global_shape = exp.obs.global_.shape
        self._arrays = {
            "local": np.zeros((cap,) + local_shape, self.dtype),
            "global_": np.zeros((cap,) + global_shape, self.dtype),
            "scalar": np.zeros(cap, self.dtype),
            "action": np.zeros(cap, np.int64),
            "reward": np.zeros(cap, np.float64),
            "next_local": np.zeros((cap,) + local_shape, self.dtype),
            "next_global": np.zeros((cap,) + global_shape, self.dtype),
            "next_scalar": np.zeros(cap, self.dtype),
            "terminal": np.zeros(cap, bool),
        }

    def push(self, exp: Experience) -> None:
        if self._arrays is None:
            self._allocate(exp)
        a, i = self._arrays, self._next
        a["local"][i] = exp.obs.local
        a["global_"][i] = exp.obs.global_
        a["scalar"][i] = exp.obs.scalar_b
        a["action"][i] = exp.action
        a["reward"][i] = exp.reward
        a["next_local"][i] = exp.next_obs.local
        a["next_global"][i] = exp.next_obs.global_
        a["next_scalar"][i] = exp.next_obs.scalar_b
        a["terminal"][i] = exp.terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    @property
    def latest_index(self) -> int:
        if self.size == 0:
            raise IndexError("replay memory is empty")
        return (self._next - 1) % self.capacity

    def gather(self, indices: np.ndarray) -> Batch:
        return Batch(**{name: arr[indices] for name, arr in self._arrays.items()})

    def cer_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """``batch_size - 1`` uniform draws with replacement plus the newest slot."""
        if self.size < max(batch_size - 1, 1):
            raise ValueError(f"need {batch_size - 1} stored experiences, have {self.size}")
        # live slots are always 0..size-1 since the ring fills from slot 0
        draws = rng.integers(0, self.size, size=batch_size - 1)
        return np.append(draws, self.latest_index)

    def sample_cer(self, batch_size: int, rng: np.random.Generator) -> Batch:
        return self.gather(self.cer_indices(batch_size, rng))
