"""Shadowed log-distance path-loss link model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import CityMap


@dataclass(frozen=True)
class ChannelParams:
    """Propagation parameters; ``power_ratio`` is transmit power over noise (linear)."""

    alpha_los: float = 2.27
    alpha_nlos: float = 3.64
    sigma2_los: float = 2.0
    sigma2_nlos: float = 5.0
    cell_edge_snr_db: float = -5.0
    power_ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha_los > self.alpha_nlos:
            raise ValueError("alpha_los must not exceed alpha_nlos")
        if self.sigma2_los < 0 or self.sigma2_nlos < 0:
            raise ValueError("shadowing variances must be non-negative")
        if self.power_ratio <= 0:
            raise ValueError("power_ratio must be positive")

    def normalized(self, city: CityMap) -> "ChannelParams":
        """Copy with ``power_ratio`` set from the map's cell-edge geometry."""
        ratio = normalize_power(city, self.cell_edge_snr_db, self.alpha_los)
        return ChannelParams(
            self.alpha_los,
            self.alpha_nlos,
            self.sigma2_los,
            self.sigma2_nlos,
            self.cell_edge_snr_db,
            ratio,
        )


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def cell_edge_distance(city: CityMap) -> float:
    """Horizontal distance in meters from the map center to a corner cell center."""
    half_span = (city.size - 1) / 2.0
    return math.hypot(half_span, half_span) * city.cell_size


def normalize_power(city: CityMap, cell_edge_snr_db: float, alpha_los: float = 2.27) -> float:
    """P/σ² such that a ground-level UAV at the map center sees the configured
    SNR to an unobstructed device in a corner cell (no shadowing)."""
    return db_to_linear(cell_edge_snr_db) * cell_edge_distance(city) ** alpha_los


def link_snr(uav_pos, device_pos, los, params: ChannelParams, shadow_draw=0.0):
    """Linear SNR averaged over small-scale fading.

    Positions are 3D meters; ``los`` selects the path-loss exponent and
    ``shadow_draw`` is the shadowing term in dB.  Vectorizes over devices
    when ``device_pos`` is ``(K, 3)`` and ``los``/``shadow_draw`` are length K.
    """
    delta = np.asarray(device_pos, dtype=float) - np.asarray(uav_pos, dtype=float)
    distance = np.sqrt(np.sum(delta * delta, axis=-1))
    alpha = np.where(los, params.alpha_los, params.alpha_nlos)
    snr = params.power_ratio * distance ** (-alpha) * 10.0 ** (np.asarray(shadow_draw) / 10.0)
    return float(snr) if np.ndim(snr) == 0 else snr


def shadow_std(los, params: ChannelParams):
    """Standard deviation (dB) of the shadowing draw for each LoS flag."""
    return np.where(los, math.sqrt(params.sigma2_los), math.sqrt(params.sigma2_nlos))


def max_rate(snr):
    """Maximum achievable rate log2(1 + SNR) in bits/s/Hz."""
    return np.log2(1.0 + np.asarray(snr)) if np.ndim(snr) else math.log2(1.0 + snr)


def effective_rate(rate: float, remaining: float, delta_n: float) -> float:
    """Rate actually achieved when the device may hold less than one slot's worth."""
    if remaining >= delta_n * rate:
        return rate
    return remaining / delta_n
