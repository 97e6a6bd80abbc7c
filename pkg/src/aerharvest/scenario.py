"""Random mission parameters and the multi-agent episode loop."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import ChannelParams
from .comms import CommContext, CommEntry, Devices, mission_slot_comms
from .dynamics import NUM_ACTIONS, Action, UavState, check_constraints, initial_state, safe_action, step_agent
from .learner import Experience
from .obsmap import Observation, observe, state_stack
from .reward import RewardParams, step_reward
from .world import CityMap, LosTable


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioRanges:
    """Inclusive sampling ranges for the randomized mission parameters."""

    num_uavs: tuple[int, int] = (1, 3)
    num_devices: tuple[int, int] = (3, 10)
    data: tuple[float, float] = (5.0, 20.0)
    flying_time: tuple[int, int] = (50, 150)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioRanges":
        unknown = set(d) - {"num_uavs", "num_devices", "data", "flying_time"}
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in d.items()})


SCENARIO_PRESETS = {
    "manhattan32": ScenarioRanges((1, 3), (3, 10), (5.0, 20.0), (50, 150)),
    "urban50": ScenarioRanges((1, 3), (5, 10), (5.0, 20.0), (100, 200)),
    "tiny8": ScenarioRanges((1, 1), (1, 1), (3.0, 6.0), (8, 16)),
}


@dataclass(frozen=True)
class ScenarioParams:
    flying_time: int
    start_cells: tuple[tuple[int, int], ...]
    device_cells: tuple[tuple[int, int], ...]
    device_data: tuple[float, ...]

    @property
    def num_uavs(self) -> int:
        return len(self.start_cells)

    @property
    def num_devices(self) -> int:
        return len(self.device_cells)

    @property
    def total_data(self) -> float:
        return float(sum(self.device_data))


def device_candidates(city: CityMap) -> np.ndarray:
    """Cells a device may occupy: anything that is not a building."""
    return np.argwhere(~city.buildings)


def sample_scenario(city: CityMap, ranges: ScenarioRanges, rng: np.random.Generator) -> ScenarioParams:
    num_uavs = int(rng.integers(ranges.num_uavs[0], ranges.num_uavs[1] + 1))
    if num_uavs > len(city.start_cells):
        raise ScenarioError(f"{num_uavs} UAVs requested but map has {len(city.start_cells)} start cells")
    num_devices = int(rng.integers(ranges.num_devices[0], ranges.num_devices[1] + 1))
    candidates = device_candidates(city)
    if num_devices > len(candidates):
        raise ScenarioError(f"{num_devices} devices requested but only {len(candidates)} free cells")
    data = rng.uniform(ranges.data[0], ranges.data[1], size=num_devices)
    flying_time = int(rng.integers(ranges.flying_time[0], ranges.flying_time[1] + 1))
    starts = rng.choice(len(city.start_cells), size=num_uavs, replace=False)
    cells = rng.choice(len(candidates), size=num_devices, replace=False)
    return ScenarioParams(
        flying_time=flying_time,
        start_cells=tuple(city.start_cells[int(s)] for s in starts),
        device_cells=tuple((int(candidates[c][0]), int(candidates[c][1])) for c in cells),
        device_data=tuple(float(d) for d in data),
    )


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class RandomPolicy:
    needs_obs = False

    def act(self, obs, agent: int, t: int, rng: np.random.Generator) -> int:
        return int(rng.integers(NUM_ACTIONS))


class GreedyPolicy:
    needs_obs = True

    def __init__(self, q_values):
        self.q_values = q_values

    def act(self, obs, agent, t, rng) -> int:
        from .learner import greedy_action

        return greedy_action(self.q_values(obs))


class SoftmaxPolicy:
    needs_obs = True

    def __init__(self, q_values, temperature: float):
        self.q_values = q_values
        self.temperature = temperature

    def act(self, obs, agent, t, rng) -> int:
        from .learner import softmax_action

        return softmax_action(self.q_values(obs), self.temperature, rng)


class ScriptedPolicy:
    """Plays fixed action lists per agent, then ``fallback`` (hover by default)."""

    needs_obs = False

    def __init__(self, scripts: list[list[int]], fallback: int = Action.HOVER):
        self.scripts = scripts
        self.fallback = fallback

    def act(self, obs, agent, t, rng) -> int:
        script = self.scripts[agent]
        return int(script[t]) if t < len(script) else int(self.fallback)


# ---------------------------------------------------------------------------
# Episode loop
# ---------------------------------------------------------------------------


@dataclass
class EpisodeResult:
    map_name: str
    scenario: ScenarioParams
    positions: list  # [T+1][I] (x, y) at the start of each slot, plus final
    actions: list  # [T][I] chosen action, None when inactive
    safe_actions: list
    rejected: list
    rewards: list  # [T][I] reward, None when inactive
    throughput: list  # [T][I] data collected per UAV in the slot
    comm_log: list[CommEntry]
    final_data: list[float]
    landed: list[bool]
    crashed: list[bool]
    comm_slots: int = 4
    losses: list[float] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def total_collected(self) -> float:
        return float(sum(sum(row) for row in self.throughput))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["comm_log"] = [asdict(e) for e in self.comm_log]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeResult":
        d = dict(d)
        s = d["scenario"]
        d["scenario"] = ScenarioParams(
            flying_time=s["flying_time"],
            start_cells=tuple(tuple(c) for c in s["start_cells"]),
            device_cells=tuple(tuple(c) for c in s["device_cells"]),
            device_data=tuple(s["device_data"]),
        )
        d["comm_log"] = [CommEntry(**e) for e in d["comm_log"]]
        d["positions"] = [[tuple(p) for p in row] for row in d["positions"]]
        return cls(**d)


@dataclass
class Simulator:
    """Static pieces of an environment: map, shadowing and model parameters."""

    city: CityMap
    los_table: LosTable
    channel: ChannelParams
    reward: RewardParams = field(default_factory=RewardParams)
    local_size: int = 17
    pool: int = 3
    comm_slots: int = 4
    mission_slot_s: float = 1.0

    def comm_context(self, devices: Devices) -> CommContext:
        return CommContext(
            los_table=self.los_table,
            params=self.channel,
            cell_size=self.city.cell_size,
            altitude=self.city.altitude,
            comm_slots=self.comm_slots,
            mission_slot_s=self.mission_slot_s,
            device_positions=devices.positions(self.city.cell_size),
        )

    def observations(self, uavs: list[UavState], devices: Devices) -> list[Observation]:
        stack = state_stack(self.city, uavs, devices)
        return [observe(self.city, uavs, devices, i, self.local_size, self.pool, stack) for i in range(len(uavs))]


def _child(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(int(rng.integers(2**63)))


def run_episode(
    sim: Simulator,
    scenario: ScenarioParams,
    policy,
    rng: np.random.Generator,
    learner=None,
    train: bool = False,
    check: bool = False,
) -> EpisodeResult:
    """Play one mission until every UAV has landed or crashed.

    Each mission slot: all operational agents observe the current state and
    choose actions; the safety controller and motion update are applied in
    ascending agent order (so an agent sees the new cells of lower-indexed
    agents); then the communication slots run; then rewards are assigned.
    With ``train`` every acting agent's experience is pushed to the learner's
    memory followed by one training step once enough experience is stored.
    """
    city = sim.city
    policy_rng, channel_rng = _child(rng), _child(rng)
    uavs = [initial_state(c, scenario.flying_time) for c in scenario.start_cells]
    n = len(uavs)
    devices = Devices(scenario.device_cells, scenario.device_data, num_uavs=n)
    ctx = sim.comm_context(devices)
    use_obs = train or getattr(policy, "needs_obs", True)
    obs = sim.observations(uavs, devices) if use_obs else [None] * n

    result = EpisodeResult(
        map_name=city.name,
        scenario=scenario,
        positions=[[u.cell for u in uavs]],
        actions=[],
        safe_actions=[],
        rejected=[],
        rewards=[],
        throughput=[],
        comm_log=[],
        final_data=[],
        landed=[],
        crashed=[],
        comm_slots=sim.comm_slots,
    )
    if check:
        result.violations += [f"t=0: {v}" for v in check_constraints(uavs, city, initial=True)]

    t = 0
    while any(u.phi for u in uavs):
        before = [u.cell for u in uavs]
        active = [u.phi for u in uavs]
        data_before = devices.remaining.copy()
        chosen: list = [None] * n
        safe: list = [None] * n
        rejected: list = [None] * n
        for i in range(n):
            if not active[i]:
                continue
            a = policy.act(obs[i], i, t, policy_rng)
            s, rej = safe_action(uavs, i, a, city)
            uavs[i] = step_agent(uavs[i], s)
            chosen[i], safe[i], rejected[i] = int(a), int(s), rej
        after = [u.cell for u in uavs]
        entries = mission_slot_comms(before, after, active, devices, ctx, channel_rng, mission_slot=t)

        rewards: list = [None] * n
        throughput = [0.0] * n
        for e in entries:
            throughput[e.uav] += e.amount
        for i in range(n):
            if active[i]:
                rewards[i] = step_reward(data_before, devices.remaining, rejected[i], uavs[i].crashed, sim.reward)

        next_obs = sim.observations(uavs, devices) if use_obs else [None] * n
        if train:
            for i in range(n):
                if not active[i]:
                    continue
                learner.memory.push(Experience(obs[i], chosen[i], rewards[i], next_obs[i], not uavs[i].phi))
                if learner.ready():
                    result.losses.append(learner.train_step())
        obs = next_obs

        result.positions.append(after)
        result.actions.append(chosen)
        result.safe_actions.append(safe)
        result.rejected.append(rejected)
        result.rewards.append(rewards)
        result.throughput.append(throughput)
        result.comm_log.extend(entries)
        if check:
            result.violations += [f"t={t + 1}: {v}" for v in check_constraints(uavs, city)]
            for i in range(n):
                if safe[i] == Action.LAND and not city.landing[before[i]]:
                    result.violations.append(f"t={t}: uav {i} executed land outside landing zone")
        t += 1

    result.final_data = [float(d) for d in devices.remaining]
    result.landed = [u.landed for u in uavs]
    result.crashed = [u.crashed for u in uavs]
    return result

