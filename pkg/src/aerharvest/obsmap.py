"""Egocentric map processing: layer mapping, centering, local crop, global pooling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comms import Devices
from .dynamics import UavState
from .world import CityMap

ENV_PAD = (0.0, 1.0, 1.0)
NUM_CHANNELS = 6  # landing, Z, B, device data, flying time, operational


class ObservationConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    local: np.ndarray  # (l, l, 6)
    global_: np.ndarray  # (g_bar, g_bar, 6)
    scalar_b: float


def check_dims(map_size: int, local_size: int, pool: int) -> None:
    centered = 2 * map_size - 1
    if local_size % 2 == 0:
        raise ObservationConfigError(f"local map size must be odd, got {local_size}")
    if not 1 <= local_size <= centered:
        raise ObservationConfigError(f"local map size {local_size} outside [1, {centered}]")
    if not 1 <= pool <= centered:
        raise ObservationConfigError(f"global pooling size {pool} outside [1, {centered}]")


def global_size(map_size: int, pool: int) -> int:
    return (2 * map_size - 1) // pool


def build_layers(size: int, uavs: list[UavState], devices: Devices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Device data, flying time and operational-status layers, each ``(M, M)``.

    Entities sharing a cell overwrite each other in index order.
    """
    data = np.zeros((size, size))
    flying = np.zeros((size, size))
    status = np.zeros((size, size))
    for (x, y), remaining in zip(devices.cells, devices.remaining):
        data[x, y] = remaining
    for uav in uavs:
        flying[uav.x, uav.y] = uav.b
        status[uav.x, uav.y] = float(uav.phi)
    return data, flying, status


def center(layers: np.ndarray, ego: tuple[int, int], pad) -> np.ndarray:
    """Pad an ``(M, M, n)`` stack to ``(2M-1, 2M-1, n)`` with ``ego`` at ``(M-1, M-1)``."""
    size = layers.shape[0]
    out = np.empty((2 * size - 1, 2 * size - 1, layers.shape[2]), dtype=layers.dtype)
    out[...] = np.asarray(pad, dtype=layers.dtype)
    ox, oy = size - 1 - ego[0], size - 1 - ego[1]
    out[ox : ox + size, oy : oy + size] = layers
    return out


def local_crop(centered: np.ndarray, local_size: int) -> np.ndarray:
    """Central ``l x l`` window of a centered stack."""
    size = (centered.shape[0] + 1) // 2
    start = size - math.ceil(local_size / 2)
    return centered[start : start + local_size, start : start + local_size]


def global_pool(centered: np.ndarray, pool: int) -> np.ndarray:
    """Average pooling with non-overlapping ``g x g`` cells; trailing rows dropped."""
    n = centered.shape[0] // pool
    total = np.zeros((n, n) + centered.shape[2:], dtype=centered.dtype)
    for u in range(pool):
        for v in range(pool):
            total += centered[u : u + pool * n : pool, v : v + pool * n : pool]
    return total / (pool * pool)


def state_stack(city: CityMap, uavs: list[UavState], devices: Devices) -> np.ndarray:
    data, flying, status = build_layers(city.size, uavs, devices)
    return np.concatenate([city.layers.astype(float), np.stack([data, flying, status], axis=-1)], axis=-1)


def observe(
    city: CityMap,
    uavs: list[UavState],
    devices: Devices,
    ego: int,
    local_size: int,
    pool: int,
    stack: np.ndarray | None = None,
) -> Observation:
    """Observation of agent ``ego``; pass a precomputed ``state_stack`` for speed."""
    if stack is None:
        stack = state_stack(city, uavs, devices)
    me = uavs[ego]
    centered = center(stack, me.cell, ENV_PAD + (0.0, 0.0, 0.0))
    return Observation(
        local=local_crop(centered, local_size).copy(),
        global_=global_pool(centered, pool),
        scalar_b=float(me.b),
    )
