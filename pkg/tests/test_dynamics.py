from hypothesis import given, settings
from hypothesis import strategies as st

from aerharvest.dynamics import (
    NUM_ACTIONS,
    Action,
    UavState,
    check_constraints,
    feasible_actions,
    initial_state,
    safe_action,
    step_agent,
)
from aerharvest.world import parse_map

# y=0 is the bottom row
CITY = parse_map(
    {
        "cells": [
            ".....",
            ".N...",
            ".....",
            ".....",
            "LL...",
        ]
    }
)


def test_action_space():
    assert NUM_ACTIONS == 6
    assert [a.name for a in Action] == ["HOVER", "EAST", "NORTH", "WEST", "SOUTH", "LAND"]


def test_feasible_actions():
    assert len(feasible_actions(initial_state((0, 0), 5), CITY)) == 6
    free = UavState(2, 2, 5)
    assert feasible_actions(free, CITY) == frozenset(Action) - {Action.LAND}
    assert feasible_actions(UavState(0, 0, 5, phi=False, airborne=False), CITY) == frozenset()


def test_safe_action_nfz_and_bounds():
    below_nfz = [UavState(1, 2, 5)]
    assert safe_action(below_nfz, 0, Action.NORTH, CITY) == (Action.HOVER, True)
    corner = [UavState(0, 0, 5)]
    assert safe_action(corner, 0, Action.WEST, CITY) == (Action.HOVER, True)
    assert safe_action(corner, 0, Action.SOUTH, CITY) == (Action.HOVER, True)
    assert safe_action(corner, 0, Action.EAST, CITY) == (Action.EAST, False)


def test_safe_action_land_outside_landing_zone():
    assert safe_action([UavState(2, 2, 5)], 0, Action.LAND, CITY) == (Action.HOVER, True)
    assert safe_action([UavState(0, 0, 5)], 0, Action.LAND, CITY) == (Action.LAND, False)


def test_safe_action_other_agents():
    landed = UavState(1, 0, 3, phi=False, airborne=False)
    flying = UavState(1, 0, 3)
    me = UavState(0, 0, 5)
    assert safe_action([me, landed], 0, Action.EAST, CITY) == (Action.EAST, False)
    assert safe_action([me, flying], 0, Action.EAST, CITY) == (Action.HOVER, True)
    # hovering next to another agent is fine
    assert safe_action([me, flying], 0, Action.HOVER, CITY) == (Action.HOVER, False)


def test_step_agent_examples():
    s = UavState(2, 2, 10)
    e = step_agent(s, Action.EAST)
    assert (e.x, e.y, e.b, e.phi) == (3, 2, 9, True)
    landed = step_agent(UavState(0, 0, 4), Action.LAND)
    assert not landed.phi and not landed.airborne and landed.landed and landed.b == 3
    crash = step_agent(UavState(2, 2, 1), Action.HOVER)
    assert crash.b == 0 and crash.crashed and not crash.phi and crash.airborne


def test_landing_on_last_step_is_not_a_crash():
    s = step_agent(UavState(0, 0, 1), Action.LAND)
    assert s.landed and not s.crashed


def test_inactive_agent_frozen():
    s = UavState(0, 0, 3, phi=False, airborne=False)
    assert step_agent(s, Action.EAST) == s


def test_check_constraints():
    a = UavState(2, 2, 5)
    assert check_constraints([a, UavState(2, 2, 5)], CITY)
    assert check_constraints([UavState(1, 3, 5)], CITY)
    # a landed agent may share its cell with an operational one
    assert check_constraints([UavState(0, 0, 5), UavState(0, 0, 2, phi=False, airborne=False)], CITY) == []
    assert check_constraints([UavState(2, 2, 2, phi=False, airborne=False)], CITY)
    starts = [initial_state((0, 0), 9), initial_state((1, 0), 9)]
    assert check_constraints(starts, CITY, initial=True) == []
    assert check_constraints([initial_state((2, 2), 9)], CITY, initial=True)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.integers(0, 5), min_size=2, max_size=2), min_size=1, max_size=40), st.integers(2, 12))
def test_random_sequences_never_violate(actions, b0):
    states = [initial_state((0, 0), b0), initial_state((1, 0), b0)]
    for row in actions:
        for i in range(len(states)):
            if not states[i].phi:
                continue
            before = states[i]
            a, _ = safe_action(states, i, row[i], CITY)
            states[i] = step_agent(states[i], a)
            assert states[i].b == before.b - 1
        assert check_constraints(states, CITY) == []


def test_sequential_order_sees_new_cells_of_lower_agents():
    # agent 0 cannot enter agent 1's current cell
    states = [UavState(2, 2, 5), UavState(3, 2, 5)]
    assert safe_action(states, 0, Action.EAST, CITY) == (Action.HOVER, True)
    # agent 1 may follow into the cell agent 0 just vacated
    states = [UavState(2, 2, 5), UavState(2, 3, 5)]
    states[0] = step_agent(states[0], safe_action(states, 0, Action.EAST, CITY)[0])
    assert states[0].cell == (3, 2)
    assert safe_action(states, 1, Action.SOUTH, CITY) == (Action.SOUTH, False)
    # but not into the cell agent 0 just entered
    states = [UavState(2, 2, 5), UavState(3, 3, 5)]
    states[0] = step_agent(states[0], safe_action(states, 0, Action.EAST, CITY)[0])
    assert safe_action(states, 1, Action.SOUTH, CITY) == (Action.HOVER, True)
