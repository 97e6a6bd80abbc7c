"""TDMA max-rate scheduling of IoT devices and the evolution of their data."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams, effective_rate, link_snr, max_rate, shadow_std
from .world import LosTable


@dataclass
class Devices:
    """Ground IoT devices.  ``cells`` is ``(K, 2)`` integer grid positions."""

    cells: np.ndarray
    initial: np.ndarray
    remaining: np.ndarray = None
    collected_by: np.ndarray = None
    num_uavs: int = 1

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        self.initial = np.asarray(self.initial, dtype=float).reshape(-1)
        if self.remaining is None:
            self.remaining = self.initial.copy()
        if self.collected_by is None:
            self.collected_by = np.zeros((self.num_uavs, len(self.initial)))

    def __len__(self) -> int:
        return len(self.initial)

    def positions(self, cell_size: float) -> np.ndarray:
        """Device positions in meters at ground level, ``(K, 3)``."""
        out = np.zeros((len(self), 3))
        out[:, :2] = self.cells * cell_size
        return out

    def copy(self) -> "Devices":
        return Devices(
            self.cells.copy(),
            self.initial.copy(),
            self.remaining.copy(),
            self.collected_by.copy(),
            self.num_uavs,
        )


@dataclass(frozen=True)
class CommEntry:
    slot: int
    uav: int
    device: int  # -1 when nothing was scheduled
    rate: float
    amount: float
    los: bool


@dataclass
class CommContext:
    """Everything the scheduler needs that stays fixed during an episode."""

    los_table: LosTable
    params: ChannelParams
    cell_size: float
    altitude: float
    comm_slots: int = 4
    mission_slot_s: float = 1.0
    device_positions: np.ndarray = field(default=None, repr=False)

    @property
    def delta_n(self) -> float:
        return self.mission_slot_s / self.comm_slots


def interpolate_position(p_t, p_t1, slot_offset: int, comm_slots: int, cell_size: float, altitude: float) -> np.ndarray:
    """UAV position in meters during a communication slot of a mission slot."""
    frac = slot_offset / comm_slots
    x = p_t[0] + frac * (p_t1[0] - p_t[0])
    y = p_t[1] + frac * (p_t1[1] - p_t[1])
    return np.array([x * cell_size, y * cell_size, altitude])


def nearest_cell(position: np.ndarray, cell_size: float) -> tuple[int, int]:
    """Grid cell for LoS lookup; exact half-cell positions round up."""
    return (int(np.floor(position[0] / cell_size + 0.5)), int(np.floor(position[1] / cell_size + 0.5)))


def schedule_slot(
    uav_positions: list,
    devices: Devices,
    ctx: CommContext,
    rng: np.random.Generator,
    slot: int = 0,
) -> list[CommEntry]:
    """Serve one communication slot for every UAV, updating ``devices`` in place.

    ``uav_positions`` holds a 3D position per UAV, or ``None`` for UAVs that
    are not operational.  UAVs are served in index order and each one sees
    the data left by lower-indexed UAVs.  Every served UAV consumes one
    standard-normal shadowing draw per device, whether or not it has data.
    """
    device_pos = ctx.device_positions
    if device_pos is None:
        device_pos = devices.positions(ctx.cell_size)
    entries = []
    for i, pos in enumerate(uav_positions):
        if pos is None:
            continue
        draws = rng.standard_normal(len(devices))
        if len(devices) == 0:
            entries.append(CommEntry(slot, i, -1, 0.0, 0.0, False))
            continue
        cx, cy = nearest_cell(pos, ctx.cell_size)
        los = ctx.los_table.from_cell((cx, cy))[devices.cells[:, 0], devices.cells[:, 1]]
        snr = link_snr(pos, device_pos, los, ctx.params, draws * shadow_std(los, ctx.params))
        candidates = np.where(devices.remaining > 0.0, snr, -np.inf)
        k = int(np.argmax(candidates))
        if not np.isfinite(candidates[k]):
            entries.append(CommEntry(slot, i, -1, 0.0, 0.0, False))
            continue
        r_max = max_rate(float(snr[k]))
        remaining = float(devices.remaining[k])
        rate = effective_rate(r_max, remaining, ctx.delta_n)
        amount = rate * ctx.delta_n if rate == r_max else remaining
        devices.remaining[k] = remaining - amount
        devices.collected_by[i, k] += amount
        entries.append(CommEntry(slot, i, k, rate, amount, bool(los[k])))
    return entries


def mission_slot_comms(
    before: list,
    after: list,
    operational: list[bool],
    devices: Devices,
    ctx: CommContext,
    rng: np.random.Generator,
    mission_slot: int = 0,
) -> list[CommEntry]:
    """Run all communication slots of one mission slot.

    ``before``/``after`` are the grid cells of each UAV at the start and end of
    the mission slot; ``operational`` is each UAV's status at the start.
    """
    entries = []
    for n in range(ctx.comm_slots):
        positions = [
            interpolate_position(p0, p1, n, ctx.comm_slots, ctx.cell_size, ctx.altitude) if active else None
            for p0, p1, active in zip(before, after, operational)
        ]
        entries.extend(schedule_slot(positions, devices, ctx, rng, slot=mission_slot * ctx.comm_slots + n))
    return entries


def mission_slot_throughput(entries: list[CommEntry], uav: int, phi: bool) -> float:
    """Data collected by ``uav`` over the given entries, gated by its status."""
    if not phi:
        return 0.0
    return sum(e.amount for e in entries if e.uav == uav)


def check_tdma(entries: list[CommEntry]) -> bool:
    """True when no UAV has more than one scheduled device in any slot."""
    seen = set()
    for e in entries:
        if e.device < 0:
            continue
        key = (e.slot, e.uav)
        if key in seen:
            return False
        seen.add(key)
    return True


def write_comm_log(entries: list[CommEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["slot", "uav", "device", "rate", "los"])
        for e in entries:
            writer.writerow([e.slot, e.uav, e.device, repr(e.rate), int(e.los)])
