import logging
import math

import numpy as np
import pytest

from panelbot.errors import ConfigError
from panelbot.mission import (TRANSITIONS, MissionEvent, MissionState, is_defined, patrol_next, run_mission, step,
                              sweep_deg, valve_rotation_waypoints)
from panelbot.scenario import generate_scenario

S, E = MissionState, MissionEvent


def test_table_is_total():
    assert len(TRANSITIONS) == len(S) * len(E)
    assert all(isinstance(v, MissionState) for v in TRANSITIONS.values())


def test_emergency_from_everywhere():
    for s in S:
        assert step(s, E.Emergency) is S.EmergencyStop


def test_terminal_states_absorb():
    for e in E:
        assert step(S.EmergencyStop, e) is S.EmergencyStop
        if e is not E.Emergency:
            assert step(S.Done, e) is S.Done


def test_happy_path():
    path = [E.PanelFound, E.PanelFound, E.Docked, E.WrenchesVisible, E.TargetRecognized, E.GraspOk,
            E.ValveAligned, E.RotationComplete]
    s = S.NavigatePatrol
    for e in path:
        s = step(s, e)
    assert s is S.Done


def test_undefined_pair_warns_and_stays(caplog):
    assert not is_defined(S.Dock, E.GraspOk)
    with caplog.at_level(logging.WARNING, logger="panelbot.mission"):
        assert step(S.Dock, E.GraspOk) is S.Dock
    assert "no transition" in caplog.text


def test_patrol_wraps():
    assert patrol_next(["a", "b", "c"], 2) == "a"
    assert patrol_next(["a", "b", "c"], 0) == "b"
    with pytest.raises(ConfigError):
        patrol_next([], 0)


def test_rotation_waypoints_circle():
    c = np.array([0.1, 0.2, 0.5])
    start = c + [0.0, 0.05, 0.0]
    poses = valve_rotation_waypoints(c, 0.05, n=36, start=start)
    assert len(poses) == 36
    assert np.allclose(poses[0].position, start)
    for p in poses:
        assert np.linalg.norm(p.position - c) == pytest.approx(0.05)
    steps = [(b.angle_deg - a.angle_deg) for a, b in zip(poses, poses[1:])]
    assert np.allclose(steps, -10.0)
    assert sweep_deg(poses) == pytest.approx(-360.0)
    assert sweep_deg(valve_rotation_waypoints(c, 0.05, n=8, clockwise=False)) == pytest.approx(360.0)
    with pytest.raises(ConfigError):
        valve_rotation_waypoints(c, 0.0)


@pytest.fixture(scope="module")
def near_run():
    return run_mission(generate_scenario(2), seed=2)


def test_mission_is_deterministic(near_run):
    again = run_mission(generate_scenario(2), seed=2)
    assert again.to_text() == near_run.to_text()
    assert near_run.final_state is S.Done


def test_far_side_tools_force_one_side_change():
    rep = run_mission(generate_scenario(11, side="far"), seed=11)
    assert rep.changed_side == 1
    assert rep.final_state is S.Done
    changes = [r for r in rep.rows if r.next_state is S.ChangeSide]
    assert len(changes) == 1


def test_four_waypoints_quarter_turns():
    poses = valve_rotation_waypoints(np.zeros(3), 0.1, n=4)
    assert [p.angle_deg for p in poses] == [0.0, -90.0, -180.0, -270.0]
    for p in poses:
        assert abs(np.linalg.norm(p.position) - 0.1) < 1e-12


def test_forced_slip_enters_recovery_with_backup():
    from dataclasses import replace
    sc = generate_scenario(2)
    sc = replace(sc, mission=replace(sc.mission, slip_probability=1.0))
    rep = run_mission(sc, seed=2)
    assert S.WrenchLostRecovery in rep.states()
    assert rep.recoveries >= 1


def test_fault_free_scenario_scores_correct_grasp():
    from dataclasses import replace
    sc = generate_scenario(2)
    sc = replace(sc, mission=replace(sc.mission, slip_probability=0.0, dock_noise=0.0, dock_heading_noise=0.0))
    rep = run_mission(sc, seed=2)
    assert rep.final_state is S.Done and rep.outcome == "Correct Grasp"
