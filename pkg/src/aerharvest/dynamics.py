"""UAV state machine: actions, safety controller, motion and battery updates."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .world import CityMap


class Action(enum.IntEnum):
    HOVER = 0
    EAST = 1
    NORTH = 2
    WEST = 3
    SOUTH = 4
    LAND = 5


NUM_ACTIONS = len(Action)

MOVES = {
    Action.HOVER: (0, 0),
    Action.EAST: (1, 0),
    Action.NORTH: (0, 1),
    Action.WEST: (-1, 0),
    Action.SOUTH: (0, -1),
    Action.LAND: (0, 0),
}


@dataclass(frozen=True)
class UavState:
    x: int
    y: int
    b: int
    phi: bool = True
    airborne: bool = True
    crashed: bool = False
    start: tuple[int, int] | None = None

    @property
    def cell(self) -> tuple[int, int]:
        return (self.x, self.y)

    @property
    def landed(self) -> bool:
        return not self.airborne and not self.crashed


def initial_state(cell: tuple[int, int], flying_time: int) -> UavState:
    return UavState(x=cell[0], y=cell[1], b=int(flying_time), start=tuple(cell))


def feasible_actions(state: UavState, city: CityMap) -> frozenset[Action]:
    if not state.phi:
        return frozenset()
    if city.landing[state.x, state.y]:
        return frozenset(Action)
    return frozenset(Action) - {Action.LAND}


def target_cell(state: UavState, action: Action) -> tuple[int, int]:
    dx, dy = MOVES[Action(action)]
    return (state.x + dx, state.y + dy)


def safe_action(states: list[UavState], i: int, action: Action, city: CityMap) -> tuple[Action, bool]:
    """Replace an unsafe action by hovering.

    Rejected are moves leaving the grid or entering Z, moves onto the current
    cell of another operational UAV, and landing outside the landing zone.
    Returns ``(safe_action, rejected)``.
    """
    action = Action(action)
    me = states[i]
    if action == Action.LAND:
        if not city.landing[me.x, me.y]:
            return Action.HOVER, True
        return action, False
    tx, ty = target_cell(me, action)
    if not city.in_bounds(tx, ty) or city.blocked[tx, ty]:
        return Action.HOVER, True
    if action != Action.HOVER:
        for j, other in enumerate(states):
            if j != i and other.phi and other.x == tx and other.y == ty:
                return Action.HOVER, True
    return action, False


def step_agent(state: UavState, action: Action) -> UavState:
    """Advance one mission slot with an action that already passed the safety check."""
    if not state.phi:
        return state
    x, y = target_cell(state, action)
    b = state.b - 1
    if Action(action) == Action.LAND:
        return replace(state, x=x, y=y, b=b, phi=False, airborne=False)
    if b <= 0:
        return replace(state, x=x, y=y, b=b, phi=False, crashed=True)
    return replace(state, x=x, y=y, b=b)


def check_constraints(states: list[UavState], city: CityMap, initial: bool = False) -> list[str]:
    """List violated mobility constraints; empty for every reachable state."""
    violations = []
    for i, s in enumerate(states):
        if s.phi:
            if not city.in_bounds(s.x, s.y):
                violations.append(f"uav {i} outside grid at {s.cell}")
            elif city.blocked[s.x, s.y]:
                violations.append(f"uav {i} inside no-fly/tall-building cell {s.cell}")
            for j in range(i + 1, len(states)):
                if states[j].phi and states[j].cell == s.cell:
                    violations.append(f"uavs {i} and {j} share cell {s.cell}")
        if s.b < 0:
            violations.append(f"uav {i} has negative flying time {s.b}")
        if s.crashed and s.phi:
            violations.append(f"uav {i} crashed but operational")
        if not s.airborne and not s.crashed and city.in_bounds(s.x, s.y) and not city.landing[s.x, s.y]:
            violations.append(f"uav {i} landed outside landing zone at {s.cell}")
        if initial:
            if not (city.in_bounds(s.x, s.y) and city.landing[s.x, s.y]) or not s.airborne:
                violations.append(f"uav {i} does not start airborne in the landing zone")
            if not s.phi:
                violations.append(f"uav {i} does not start operational")
    return violations
